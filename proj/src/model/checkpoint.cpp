#include "ivaear/model/checkpoint.hpp"

#include "ivaear/error.hpp"
#include "ivaear/rng.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ivaear::model {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

json net_json(const nn::NetworkParams& net) {
  json heads = json::array();
  for (const auto& h : net.heads) heads.push_back({{"width", h.width}, {"activation", nn::to_string(h.activation)}});
  return {{"layer_sizes", net.layer_sizes},
          {"hidden_activation", nn::to_string(net.hidden_activation)},
          {"heads", heads}};
}

json spec_json(const auxdata::AuxiliarySpec& s) {
  return {{"kind", auxdata::to_string(s.kind)},
          {"spatial_levels", s.spatial_levels},
          {"temporal_levels", s.temporal_levels},
          {"spatial_grid", s.spatial_grid},
          {"temporal_segment_len", s.temporal_segment_len},
          {"period", s.period},
          {"year_breaks", s.year_breaks},
          {"time_min", s.time_min},
          {"time_max", s.time_max}};
}

auxdata::AuxiliarySpec json_spec(const json& j) {
  auxdata::AuxiliarySpec s;
  s.kind = auxdata::aux_kind_from_string(j.at("kind").get<std::string>());
  s.spatial_levels = j.at("spatial_levels").get<std::vector<Index>>();
  s.temporal_levels = j.at("temporal_levels").get<std::vector<Index>>();
  s.spatial_grid = j.at("spatial_grid").get<Index>();
  s.temporal_segment_len = j.at("temporal_segment_len").get<Index>();
  s.period = j.at("period").get<Index>();
  s.year_breaks = j.at("year_breaks").get<std::vector<std::int64_t>>();
  s.time_min = j.at("time_min").get<std::int64_t>();
  s.time_max = j.at("time_max").get<std::int64_t>();
  return s;
}

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_network(std::string& out, const nn::NetworkParams& net) {
  put<std::uint64_t>(out, net.layer_count());
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& w = net.weights[l];
    put<std::uint64_t>(out, static_cast<std::uint64_t>(w.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(w.cols()));
    for (Index i = 0; i < w.rows(); ++i)
      for (Index k = 0; k < w.cols(); ++k) put<double>(out, w(i, k));
    for (Index i = 0; i < net.biases[l].size(); ++i) put<double>(out, net.biases[l](i));
  }
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <class T>
  T get(const char* what) {
    if (end_ - pos_ < sizeof(T)) throw CheckpointFormatError(std::string("checkpoint truncated while reading ") + what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string take(std::size_t n, const char* what) {
    if (end_ - pos_ < n) throw CheckpointFormatError(std::string("checkpoint truncated while reading ") + what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return end_ - pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

nn::NetworkParams get_network(Reader& r, const json& meta, const char* name) {
  nn::NetworkParams net;
  net.layer_sizes = meta.at("layer_sizes").get<std::vector<Index>>();
  net.hidden_activation = nn::activation_from_string(meta.at("hidden_activation").get<std::string>());
  for (const auto& h : meta.at("heads")) {
    net.heads.push_back({h.at("width").get<Index>(),
                         nn::activation_from_string(h.at("activation").get<std::string>())});
  }
  const auto layers = r.get<std::uint64_t>("layer count");
  if (layers + 1 != net.layer_sizes.size()) {
    throw CheckpointFormatError(std::string(name) + ": layer count disagrees with config record");
  }
  for (std::uint64_t l = 0; l < layers; ++l) {
    const auto rows = r.get<std::uint64_t>("layer shape");
    const auto cols = r.get<std::uint64_t>("layer shape");
    if (static_cast<Index>(rows) != net.layer_sizes[l + 1] || static_cast<Index>(cols) != net.layer_sizes[l]) {
      throw CheckpointFormatError(std::string(name) + ": layer " + std::to_string(l) + " shape disagrees with config record");
    }
    if (r.remaining() / 8 < rows * (cols + 1)) throw CheckpointFormatError(std::string(name) + ": truncated weights");
    Matrix w(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < w.rows(); ++i)
      for (Index k = 0; k < w.cols(); ++k) w(i, k) = r.get<double>("weights");
    Eigen::VectorXd b(static_cast<Index>(rows));
    for (Index i = 0; i < b.size(); ++i) b(i) = r.get<double>("biases");
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  try {
    net.validate();
  } catch (const Error& e) {
    throw CheckpointFormatError(std::string(name) + ": " + e.what());
  }
  return net;
}

}  // namespace

std::string serialize_checkpoint(const IVaeArModel& model) {
  json cfg = {{"dims", {{"S", model.dims.S}, {"P", model.dims.P}, {"W", model.dims.W}, {"m", model.dims.m}}},
              {"beta", model.beta},
              {"encoder", net_json(model.encoder)},
              {"decoder", net_json(model.decoder)},
              {"auxnet", net_json(model.auxnet)},
              {"x_scaler", {{"mean", vec_json(model.x_scaler.mean)}, {"scale", vec_json(model.x_scaler.scale)}}},
              {"u_scaler", {{"mean", vec_json(model.u_scaler.mean)}, {"scale", vec_json(model.u_scaler.scale)}}}};
  cfg["aux_spec"] = model.aux_spec ? spec_json(*model.aux_spec) : json(nullptr);
  const std::string text = cfg.dump();

  std::string out(kCheckpointMagic, 8);
  put<std::uint64_t>(out, text.size());
  out += text;
  put_network(out, model.encoder);
  put_network(out, model.decoder);
  put_network(out, model.auxnet);
  put<std::uint64_t>(out, fnv1a(out));
  return out;
}

IVaeArModel deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 6, kCheckpointMagic, 6) != 0) {
    throw CheckpointFormatError("not an iVAEar checkpoint (bad magic)");
  }
  if (bytes.compare(0, 8, kCheckpointMagic, 8) != 0) {
    throw UnsupportedVersion("unsupported checkpoint version '" + bytes.substr(6, 2) + "' (expected '" +
                             std::string(kCheckpointMagic + 6) + "')");
  }
  if (bytes.size() < 8 + 8 + 8) throw CheckpointFormatError("checkpoint truncated");
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (stored != fnv1a(std::string_view(bytes.data(), body))) {
    throw CheckpointFormatError("checkpoint checksum mismatch (file corrupted or truncated)");
  }

  Reader r(bytes, body);
  r.skip(8);
  const auto len = r.get<std::uint64_t>("config length");
  const std::string text = r.take(static_cast<std::size_t>(len), "config record");
  IVaeArModel m;
  try {
    const json cfg = json::parse(text);
    const auto& d = cfg.at("dims");
    m.dims = {d.at("S").get<Index>(), d.at("P").get<Index>(), d.at("W").get<Index>(), d.at("m").get<Index>()};
    m.beta = cfg.at("beta").get<double>();
    m.x_scaler = {json_vec(cfg.at("x_scaler").at("mean")), json_vec(cfg.at("x_scaler").at("scale"))};
    m.u_scaler = {json_vec(cfg.at("u_scaler").at("mean")), json_vec(cfg.at("u_scaler").at("scale"))};
    if (!cfg.at("aux_spec").is_null()) m.aux_spec = json_spec(cfg.at("aux_spec"));
    m.encoder = get_network(r, cfg.at("encoder"), "encoder");
    m.decoder = get_network(r, cfg.at("decoder"), "decoder");
    m.auxnet = get_network(r, cfg.at("auxnet"), "auxnet");
  } catch (const json::exception& e) {
    throw CheckpointFormatError(std::string("malformed checkpoint config record: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CheckpointFormatError(std::string("malformed checkpoint config record: ") + e.what());
  }
  if (r.remaining() != 0) throw CheckpointFormatError("trailing bytes after checkpoint payload");
  if (m.x_scaler.size() != m.dims.S || m.u_scaler.size() != m.dims.m ||
      m.encoder.input_dim() != m.dims.S + m.dims.m || m.decoder.input_dim() != m.dims.P ||
      m.auxnet.input_dim() != m.dims.m || m.auxnet.output_dim() != (2 + m.dims.W) * m.dims.P) {
    throw CheckpointFormatError("checkpoint networks disagree with recorded dimensions");
  }
  return m;
}

void checkpoint_save(const IVaeArModel& model, const std::string& path) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing '" + path + "'");
}

IVaeArModel checkpoint_load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace ivaear::model
