#pragma once

#include "classifier.hpp"
#include "knn.hpp"
#include "lda.hpp"
#include "nbc.hpp"
#include "svm.hpp"

namespace moveprim {

struct ClassifierOptions {
  LdaOptions lda;
  SvmOptions svm;
  KnnOptions knn;
};

inline std::unique_ptr<Classifier> make_classifier(Algorithm a, const ClassifierOptions& opts = {}) {
  switch (a) {
    case Algorithm::Lda: return std::make_unique<LdaModel>(opts.lda);
    case Algorithm::Nbc: return std::make_unique<NbcModel>();
    case Algorithm::Svm: return std::make_unique<SvmOvaModel>(opts.svm);
    case Algorithm::Knn: return std::make_unique<KnnModel>(opts.knn);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown algorithm");
}

inline std::unique_ptr<Classifier> classifier_from_json(const nlohmann::json& j) {
  const auto name = j.at("algorithm").get<std::string>();
  const auto a = parse_algorithm(name);
  if (!a) throw Error(ErrorCode::InvalidArgument, "unknown algorithm '" + name + "'");
  switch (*a) {
    case Algorithm::Lda: return std::make_unique<LdaModel>(LdaModel::from_json(j));
    case Algorithm::Nbc: return std::make_unique<NbcModel>(NbcModel::from_json(j));
    case Algorithm::Svm: return std::make_unique<SvmOvaModel>(SvmOvaModel::from_json(j));
    case Algorithm::Knn: return std::make_unique<KnnModel>(KnnModel::from_json(j));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown algorithm");
}

inline std::string algorithm_names() {
  std::string out;
  for (auto a : kAllAlgorithms) {
    if (!out.empty()) out += ", ";
    out += algorithm_name(a);
  }
  return out;
}

}  // namespace moveprim
