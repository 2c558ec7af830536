#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "idsr/config.hpp"
#include "idsr/model.hpp"

namespace idsr {

static_assert(std::endian::native == std::endian::little,
              "checkpoint tensors are stored little-endian");

// Sidecar facts a resumed or evaluated run needs beyond the raw weights.
struct CheckpointMeta {
  TrainConfig train;
  int n_items = 0;
  int epoch = 0;           // epoch that produced these weights (1-based)
  double best_val = 0.0;   // selection metric at that epoch
  std::string dataset_id;  // checksum tying weights to their prepared data
};

namespace detail {

constexpr char kCkptMagic[8] = {'I', 'D', 'S', 'R', 'C', 'K', 'P', '1'};

inline void put_u64(std::ostream& out, std::uint64_t x) {
  char buf[8];
  std::memcpy(buf, &x, 8);
  out.write(buf, 8);
}

inline std::uint64_t get_u64(std::istream& in, const std::string& what) {
  char buf[8];
  if (!in.read(buf, 8)) throw IoError("checkpoint truncated reading " + what);
  std::uint64_t x;
  std::memcpy(&x, buf, 8);
  return x;
}

inline std::string get_blob(std::istream& in, std::uint64_t n,
                            const std::string& what) {
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw IoError("checkpoint truncated reading " + what);
  return s;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path,
                            const CheckpointMeta& meta,
                            const ModelParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());

  nlohmann::json j;
  j["config"] = meta.train.to_text();
  j["n_items"] = meta.n_items;
  j["epoch"] = meta.epoch;
  j["best_val"] = meta.best_val;
  j["dataset_id"] = meta.dataset_id;
  std::string js = j.dump();

  out.write(detail::kCkptMagic, 8);
  detail::put_u64(out, js.size());
  out.write(js.data(), static_cast<std::streamsize>(js.size()));

  std::size_t n_tensors = 0;
  for_each_param(params, [&](const std::string&, const Mat&) { ++n_tensors; });
  detail::put_u64(out, n_tensors);
  for_each_param(params, [&](const std::string& name, const Mat& m) {
    detail::put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u64(out, static_cast<std::uint64_t>(m.rows()));
    detail::put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        double x = m(r, c);
        char buf[8];
        std::memcpy(buf, &x, 8);
        out.write(buf, 8);
      }
  });
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::pair<CheckpointMeta, ModelParams> load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, detail::kCkptMagic, 8) != 0)
    throw DataError(path.string() + " is not a model checkpoint");

  std::uint64_t jlen = detail::get_u64(in, "header length");
  std::string js = detail::get_blob(in, jlen, "header");
  CheckpointMeta meta;
  try {
    auto j = nlohmann::json::parse(js);
    meta.train = TrainConfig::parse_text(j.at("config").get<std::string>());
    meta.n_items = j.at("n_items").get<int>();
    meta.epoch = j.at("epoch").get<int>();
    meta.best_val = j.at("best_val").get<double>();
    meta.dataset_id = j.at("dataset_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad checkpoint header: " + std::string(e.what()));
  }

  ModelParams params = zero_params(meta.train.model_config(meta.n_items));
  std::uint64_t n_tensors = detail::get_u64(in, "tensor count");
  std::size_t expected = 0;
  for_each_param(params, [&](const std::string&, const Mat&) { ++expected; });
  if (n_tensors != expected)
    throw DataError("checkpoint has " + std::to_string(n_tensors) +
                    " tensors, model needs " + std::to_string(expected));

  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    std::uint64_t nlen = detail::get_u64(in, "tensor name length");
    std::string name = detail::get_blob(in, nlen, "tensor name");
    auto rows = static_cast<Eigen::Index>(detail::get_u64(in, "tensor rows"));
    auto cols = static_cast<Eigen::Index>(detail::get_u64(in, "tensor cols"));
    Mat* dst = nullptr;
    for_each_param(params, [&](const std::string& pname, Mat& m) {
      if (pname == name) dst = &m;
    });
    if (!dst) throw DataError("checkpoint tensor '" + name + "' is unknown");
    if (dst->rows() != rows || dst->cols() != cols)
      throw DataError("checkpoint tensor '" + name + "' is " +
                      std::to_string(rows) + "x" + std::to_string(cols) +
                      ", model expects " + std::to_string(dst->rows()) + "x" +
                      std::to_string(dst->cols()));
    std::string blob =
        detail::get_blob(in, static_cast<std::uint64_t>(rows * cols * 8),
                         "tensor '" + name + "'");
    const char* p = blob.data();
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        double x;
        std::memcpy(&x, p, 8);
        p += 8;
        (*dst)(r, c) = x;
      }
  }
  return {std::move(meta), std::move(params)};
}

}  // namespace idsr
