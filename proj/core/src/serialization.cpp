#include "tmf/serialization.hpp"

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tmf/error.hpp"

namespace tmf {
namespace {

constexpr const char* kFormat = "tmf-factor-model";
constexpr int kVersion = 1;

std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

Eigen::MatrixXd from_row_major(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
    throw Error("matrix payload has " + std::to_string(v.size()) + " entries, expected " +
                std::to_string(rows * cols));
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

}  // namespace

void write_model_json(std::ostream& out, const FactorModel& model) {
  const auto& hp = model.params;
  nlohmann::json doc = {
      {"format", kFormat},
      {"version", kVersion},
      {"D", model.users.rows()},
      {"M", model.users.cols()},
      {"N", model.items.cols()},
      {"hyperparams",
       {{"factors", hp.factors},
        {"learning_rate", hp.learning_rate},
        {"regularization", hp.regularization},
        {"epochs", hp.epochs},
        {"seed", hp.seed},
        {"sequential_updates", hp.sequential_updates}}},
      {"P", row_major(model.users)},
      {"Q", row_major(model.items)},
  };
  out << doc.dump() << '\n';
}

FactorModel read_model_json(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
  if (doc.value("format", "") != kFormat) throw Error("not a tmf-factor-model file");
  if (doc.value("version", 0) != kVersion) {
    throw Error("unsupported model version " + doc.value("version", nlohmann::json()).dump());
  }
  try {
    FactorModel model;
    const auto d = doc.at("D").get<Eigen::Index>();
    const auto m = doc.at("M").get<Eigen::Index>();
    const auto n = doc.at("N").get<Eigen::Index>();
    const auto& hp = doc.at("hyperparams");
    model.params.factors = hp.at("factors").get<int>();
    model.params.learning_rate = hp.at("learning_rate").get<double>();
    model.params.regularization = hp.at("regularization").get<double>();
    model.params.epochs = hp.at("epochs").get<int>();
    model.params.seed = hp.at("seed").get<std::uint64_t>();
    model.params.sequential_updates = hp.value("sequential_updates", false);
    model.users = from_row_major(doc.at("P").get<std::vector<double>>(), d, m);
    model.items = from_row_major(doc.at("Q").get<std::vector<double>>(), d, n);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const FactorModel& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_model_json(out, model);
}

FactorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_model_json(in);
}

}  // namespace tmf
