#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wta/errors.hpp"
#include "wta/models.hpp"

namespace wta {
namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  return json(std::vector<double>(m.data(), m.data() + m.size()));
}

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Matrix matrix_from_json(const json& doc, const char* key, std::size_t rows, std::size_t cols) {
  const auto values = doc.at(key).get<std::vector<double>>();
  if (values.size() != rows * cols) {
    throw DimensionError(std::string("model file: '") + key + "' has " + std::to_string(values.size()) +
                         " entries, expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

Vector vector_from_json(const json& doc, const char* key, std::size_t n) {
  const auto values = doc.at(key).get<std::vector<double>>();
  if (values.size() != n) {
    throw DimensionError(std::string("model file: '") + key + "' has " + std::to_string(values.size()) +
                         " entries, expected " + std::to_string(n));
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(n));
}

}  // namespace

std::string serialize_model(const AnyModel& model) {
  const auto& a = assignment_of(model);
  json doc;
  doc["format"] = "wta-model";
  doc["format_version"] = kModelFormatVersion;
  doc["family"] = to_string(family_of(model));
  doc["M"] = a.neurons();
  doc["D"] = dim_of(model);
  doc["K"] = a.classes();
  doc["class_of"] = a.class_of();
  std::visit(
      [&doc](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IpWtaModel>) {
          doc["weights"] = matrix_to_json(m.weights);
          doc["biases"] = vector_to_json(m.biases);
        } else if constexpr (std::is_same_v<T, EdWtaModel>) {
          doc["beta"] = m.beta;
          doc["centers"] = matrix_to_json(m.centers);
          doc["ed_biases"] = vector_to_json(m.ed_biases);
        } else if constexpr (std::is_same_v<T, PnIpWtaModel>) {
          doc["w_plus"] = matrix_to_json(m.w_plus);
          doc["w_minus"] = matrix_to_json(m.w_minus);
        } else {
          doc["beta"] = m.beta;
          doc["c_plus"] = matrix_to_json(m.c_plus);
          doc["c_minus"] = matrix_to_json(m.c_minus);
        }
      },
      model);
  return doc.dump(1) + "\n";
}

AnyModel deserialize_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  try {
    if (doc.value("format", "") != "wta-model") throw FormatError("model file: missing 'wta-model' format tag");
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw FormatError("model file: format_version " + std::to_string(version) + ", this build reads " +
                        std::to_string(kModelFormatVersion));
    }
    const auto m = doc.at("M").get<std::size_t>();
    const auto d = doc.at("D").get<std::size_t>();
    const auto k = doc.at("K").get<std::size_t>();
    auto class_of = doc.at("class_of").get<std::vector<int>>();
    if (class_of.size() != m) throw DimensionError("model file: class_of length differs from M");
    NeuronAssignment assignment(std::move(class_of), k);

    AnyModel out;
    switch (parse_family(doc.at("family").get<std::string>())) {
      case Family::ip: {
        IpWtaModel ip{matrix_from_json(doc, "weights", m, d), vector_from_json(doc, "biases", m), assignment};
        ip.validate();
        out = std::move(ip);
        break;
      }
      case Family::ed: {
        EdWtaModel ed{matrix_from_json(doc, "centers", m, d), vector_from_json(doc, "ed_biases", m),
                      doc.at("beta").get<double>(), assignment};
        ed.validate();
        out = std::move(ed);
        break;
      }
      case Family::pn_ip: {
        PnIpWtaModel pn{matrix_from_json(doc, "w_plus", m, d + 1), matrix_from_json(doc, "w_minus", m, d + 1),
                        assignment};
        pn.validate();
        out = std::move(pn);
        break;
      }
      case Family::pn_ed: {
        PnEdWtaModel pn{matrix_from_json(doc, "c_plus", m, d), matrix_from_json(doc, "c_minus", m, d),
                        doc.at("beta").get<double>(), assignment};
        pn.validate();
        out = std::move(pn);
        break;
      }
    }
    return out;
  } catch (const UsageError& e) {
    throw FormatError(std::string("model file: ") + e.what());
  } catch (const json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

void save_model(const AnyModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_model(model);
  if (!out) throw IoError("write failed: " + path.string());
}

AnyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize_model(buf.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace wta
