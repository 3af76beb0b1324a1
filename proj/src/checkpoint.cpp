#include <fstream>

#include <json.hpp>

#include "connectome/error.hpp"
#include "connectome/models.hpp"
#include "le_io.hpp"

namespace connectome {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMagic = "CXCKPT1";

std::string read_line(std::istream& is, const fs::path& path) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), Errc::format, "empty checkpoint " + path.string());
  return line;
}

}  // namespace

void save_checkpoint(const fs::path& path, const Model& m) {
  nlohmann::json j;
  j["family"] = to_string(family_of(m));
  j["task"] = to_string(task_of(m));
  j["parcellation_id"] = parcellation_of(m);

  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), Errc::io, "cannot write checkpoint " + path.string());
  if (const auto* r = std::get_if<RidgeModel>(&m)) {
    j["dtype"] = "f64";
    j["alpha"] = r->alpha;
    j["features"] = r->weights.size();
    os << kMagic << ' ' << j.dump() << '\n';
    auto payload = r->weights;
    payload.push_back(r->intercept);
    detail::write_le(os, payload);
  } else {
    const auto& n = std::get<NetModel>(m);
    j["dtype"] = "f32";
    j["input_shape"] = n.net.input_shape();
    j["layers"] = nlohmann::json::parse(specs_to_json(n.net.specs()));
    j["parameters"] = n.net.parameter_count();
    j["buffers"] = n.net.buffer_count();
    j["target_shift"] = n.target_shift;
    j["target_scale"] = n.target_scale;
    os << kMagic << ' ' << j.dump() << '\n';
    detail::write_le(os, n.net.flat_parameters());
    detail::write_le(os, n.net.flat_buffers());
  }
  require(static_cast<bool>(os.flush()), Errc::io, "write failed for " + path.string());
}

Model load_checkpoint(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), Errc::io, "cannot open checkpoint " + path.string());
  const auto line = read_line(is, path);
  const std::string magic = std::string(kMagic) + ' ';
  require(line.rfind(magic, 0) == 0, Errc::format, path.string() + " is not a checkpoint");

  Model out;
  try {
    const auto j = nlohmann::json::parse(line.substr(magic.size()));
    const auto family = family_from_string(j.at("family").get<std::string>());
    const auto task = task_from_string(j.at("task").get<std::string>());
    const auto pid = j.value("parcellation_id", std::string());
    if (family == Family::ridge) {
      require(j.at("dtype") == "f64", Errc::format, "ridge checkpoint must carry f64 payload");
      RidgeModel r;
      r.task = task;
      r.parcellation_id = pid;
      r.alpha = j.at("alpha").get<double>();
      const auto p = j.at("features").get<std::size_t>();
      std::vector<double> payload;
      detail::read_le(is, payload, p + 1);
      r.intercept = payload.back();
      payload.pop_back();
      r.weights = std::move(payload);
      out = std::move(r);
    } else {
      require(j.at("dtype") == "f32", Errc::format, "network checkpoint must carry f32 payload");
      NetModel n;
      n.family = family;
      n.task = task;
      n.parcellation_id = pid;
      n.target_shift = j.value("target_shift", 0.0);
      n.target_scale = j.value("target_scale", 1.0);
      const auto shape = j.at("input_shape").get<nn::Shape>();
      n.net = nn::Network<float>(shape, specs_from_json(j.at("layers").dump()), 0);
      const auto np = j.at("parameters").get<std::size_t>();
      const auto nb = j.at("buffers").get<std::size_t>();
      require(np == n.net.parameter_count() && nb == n.net.buffer_count(), Errc::format,
              "checkpoint parameter counts disagree with its layer list");
      std::vector<float> params, buffers;
      detail::read_le(is, params, np);
      detail::read_le(is, buffers, nb);
      n.net.set_flat_parameters(params);
      n.net.set_flat_buffers(buffers);
      out = std::move(n);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, "bad checkpoint descriptor in " + path.string() + ": " + e.what());
  }
  char extra;
  require(!is.get(extra), Errc::format, "trailing bytes after checkpoint payload in " + path.string());
  return out;
}

}  // namespace connectome
