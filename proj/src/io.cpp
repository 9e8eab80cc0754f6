#include "mslab/io.hpp"

#include <stdexcept>
#include <string>

namespace mslab {

nlohmann::json to_json(const MatrixTuple& x) {
  nlohmann::json mats = nlohmann::json::array();
  for (const auto& m : x) {
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::json rr = nlohmann::json::array(), ir = nlohmann::json::array();
      for (Eigen::Index k = 0; k < m.cols(); ++k) {
        rr.push_back(m(i, k).real());
        ir.push_back(m(i, k).imag());
      }
      re.push_back(rr);
      im.push_back(ir);
    }
    mats.push_back({{"re", re}, {"im", im}});
  }
  return {{"n", x.n()}, {"d", x.d()}, {"matrices", mats}};
}

namespace {

Matrix matrix_from_json(const nlohmann::json& j, int index) {
  const std::string where = "matrix " + std::to_string(index) + ": ";
  if (j.contains("diag")) {
    const auto diag = j.at("diag").get<std::vector<double>>();
    if (diag.empty()) throw std::invalid_argument(where + "empty diagonal");
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(diag.data(), static_cast<Eigen::Index>(diag.size()));
    return v.cast<Complex>().asDiagonal();
  }
  const auto re = j.at("re").get<std::vector<std::vector<double>>>();
  const auto n = static_cast<Eigen::Index>(re.size());
  if (n == 0) throw std::invalid_argument(where + "empty matrix");
  std::vector<std::vector<double>> im;
  if (j.contains("im")) im = j.at("im").get<std::vector<std::vector<double>>>();
  Matrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto ru = static_cast<std::size_t>(r);
    if (static_cast<Eigen::Index>(re[ru].size()) != n) throw std::invalid_argument(where + "matrix is not square");
    if (!im.empty() && (im.size() != re.size() || im[ru].size() != re[ru].size())) {
      throw std::invalid_argument(where + "re and im shapes differ");
    }
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      m(r, c) = Complex(re[ru][cu], im.empty() ? 0.0 : im[ru][cu]);
    }
  }
  return m;
}

}  // namespace

MatrixTuple tuple_from_json(const nlohmann::json& j) {
  try {
    std::vector<Matrix> mats;
    int k = 0;
    for (const auto& mj : j.at("matrices")) mats.push_back(matrix_from_json(mj, k++));
    if (mats.empty()) throw std::invalid_argument("tuple: no matrices");
    for (const auto& m : mats) {
      if (m.rows() != mats.front().rows()) throw std::invalid_argument("tuple: matrices have different sizes");
    }
    return MatrixTuple(std::move(mats));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("tuple: ") + e.what());
  }
}

}  // namespace mslab
