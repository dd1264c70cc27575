#include "sarsfe/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include "sarsfe/error.hpp"
#include "sarsfe/tensor_io.hpp"

namespace sarsfe {

namespace fs = std::filesystem;

fs::path checkpoint_dir_name(const fs::path& output_dir, std::uint64_t step) {
  return output_dir / ("ckpt_" + std::to_string(step));
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

}  // namespace

template <typename T>
void save_params(const fs::path& dir, const std::string& prefix, const ModelParams<T>& params) {
  for (const auto& t : params.named_tensors()) {
    const Mat<T>& m = *t.value;
    // Eigen is column-major; the file is row-major.
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    std::vector<std::uint64_t> shape;
    if (t.is_vector) {
      shape = {static_cast<std::uint64_t>(m.size())};
    } else {
      shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    }
    write_tensor(dir / (prefix + "." + t.name + ".sfet"), shape, std::span<const T>(rm.data(), rm.size()));
  }
}

template <typename T>
void load_params(const fs::path& dir, const std::string& prefix, ModelParams<T>& params) {
  for (auto& t : params.named_tensors()) {
    const fs::path path = dir / (prefix + "." + t.name + ".sfet");
    if (!fs::exists(path)) throw Error(ErrorKind::File, "missing checkpoint tensor " + path.string());
    const TensorData data = read_tensor(path);
    Mat<T>& m = *t.value;
    const bool ok = t.is_vector ? data.shape == std::vector<std::uint64_t>{static_cast<std::uint64_t>(m.size())}
                                : data.shape == std::vector<std::uint64_t>{static_cast<std::uint64_t>(m.rows()),
                                                                           static_cast<std::uint64_t>(m.cols())};
    if (!ok) throw Error(ErrorKind::Structural, "tensor shape mismatch in " + path.string());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<T>(data.values[i * m.cols() + j]);
    }
  }
}

void save_checkpoint(const fs::path& dir, const RunConfig& config, const TrainState& state) {
  fs::path tmp = dir;
  tmp += ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  save_params(tmp, "student", state.student);
  save_params(tmp, "teacher", state.teacher);
  save_params(tmp, "adam_m", state.adam_m);
  save_params(tmp, "adam_v", state.adam_v);
  write_text(tmp / "config.json", run_config_to_json(config));
  nlohmann::ordered_json st;
  st["step"] = state.step;
  st["batch"] = state.batch;
  st["seed"] = config.train.seed;
  write_text(tmp / "state.json", st.dump(2) + "\n");
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::File, "checkpoint directory not found: " + dir.string());
  Checkpoint ck;
  ck.config = parse_run_config(read_text(dir / "config.json"));
  const auto& enc = ck.config.encoder;
  ck.state.student = ModelParams<float>::zeros(enc);
  ck.state.teacher = ModelParams<float>::zeros(enc);
  ck.state.adam_m = ModelParams<float>::zeros(enc);
  ck.state.adam_v = ModelParams<float>::zeros(enc);
  load_params(dir, "student", ck.state.student);
  load_params(dir, "teacher", ck.state.teacher);
  load_params(dir, "adam_m", ck.state.adam_m);
  load_params(dir, "adam_v", ck.state.adam_v);
  try {
    const auto st = nlohmann::json::parse(read_text(dir / "state.json"));
    ck.state.step = st.at("step").get<std::uint64_t>();
    ck.state.batch = st.at("batch").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, "state.json in " + dir.string() + ": " + e.what());
  }
  return ck;
}

ModelParams<float> load_student(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::File, "checkpoint directory not found: " + dir.string());
  const RunConfig cfg = parse_run_config(read_text(dir / "config.json"));
  auto params = ModelParams<float>::zeros(cfg.encoder);
  load_params(dir, "student", params);
  return params;
}

template void save_params<float>(const fs::path&, const std::string&, const ModelParams<float>&);
template void save_params<double>(const fs::path&, const std::string&, const ModelParams<double>&);
template void load_params<float>(const fs::path&, const std::string&, ModelParams<float>&);
template void load_params<double>(const fs::path&, const std::string&, ModelParams<double>&);

}  // namespace sarsfe
