#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "idsr/dataset.hpp"

namespace idsr {

inline const std::vector<std::string>& ml100k_genre_names() {
  static const std::vector<std::string> names = {
      "unknown",  "Action",    "Adventure", "Animation", "Children's",
      "Comedy",   "Crime",     "Documentary", "Drama",   "Fantasy",
      "Film-Noir", "Horror",   "Musical",   "Mystery",   "Romance",
      "Sci-Fi",   "Thriller",  "War",       "Western"};
  return names;
}

inline const std::vector<std::string>& ml1m_genre_names() {
  static const std::vector<std::string> names = {
      "Action",    "Adventure", "Animation", "Children's", "Comedy",
      "Crime",     "Documentary", "Drama",   "Fantasy",    "Film-Noir",
      "Horror",    "Musical",   "Mystery",   "Romance",    "Sci-Fi",
      "Thriller",  "War",       "Western"};
  return names;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string fnv1a64_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << bytes;
  if (!out) throw IoError("write failed for " + path.string());
}

namespace detail {

inline std::vector<std::string> split(const std::string& s,
                                      const std::string& sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    std::size_t next = s.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

inline long long parse_ll(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad integer '" + s + "' in " + ctx);
  }
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = text.find('\n', pos);
    if (next == std::string::npos) {
      out.push_back(text.substr(pos));
      break;
    }
    std::string line = text.substr(pos, next - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
    pos = next + 1;
  }
  return out;
}

}  // namespace detail

inline RawCorpus load_ml100k(const std::filesystem::path& dir) {
  RawCorpus raw;
  raw.format = "ml100k";
  raw.genre_names = ml100k_genre_names();

  auto data_lines = detail::lines_of(read_file(dir / "u.data"));
  for (std::size_t i = 0; i < data_lines.size(); ++i) {
    if (data_lines[i].empty()) continue;
    auto f = detail::split(data_lines[i], "\t");
    if (f.size() != 4)
      throw DataError("u.data line " + std::to_string(i + 1) +
                      ": expected 4 tab-separated fields");
    std::string ctx = "u.data line " + std::to_string(i + 1);
    Interaction x;
    x.user = static_cast<int>(detail::parse_ll(f[0], ctx));
    x.item = static_cast<int>(detail::parse_ll(f[1], ctx));
    x.timestamp = detail::parse_ll(f[3], ctx);
    raw.interactions.push_back(x);
  }

  auto item_lines = detail::lines_of(read_file(dir / "u.item"));
  for (std::size_t i = 0; i < item_lines.size(); ++i) {
    if (item_lines[i].empty()) continue;
    auto f = detail::split(item_lines[i], "|");
    if (f.size() != 24)
      throw DataError("u.item line " + std::to_string(i + 1) +
                      ": expected 24 pipe-separated fields");
    std::string ctx = "u.item line " + std::to_string(i + 1);
    int id = static_cast<int>(detail::parse_ll(f[0], ctx));
    std::vector<std::uint8_t> flags(19);
    for (int g = 0; g < 19; ++g)
      flags[g] = detail::parse_ll(f[5 + g], ctx) != 0;
    raw.item_flags[id] = std::move(flags);
  }
  return raw;
}

inline RawCorpus load_ml1m(const std::filesystem::path& dir) {
  RawCorpus raw;
  raw.format = "ml1m";
  raw.genre_names = ml1m_genre_names();

  auto rating_lines = detail::lines_of(read_file(dir / "ratings.dat"));
  for (std::size_t i = 0; i < rating_lines.size(); ++i) {
    if (rating_lines[i].empty()) continue;
    auto f = detail::split(rating_lines[i], "::");
    if (f.size() != 4)
      throw DataError("ratings.dat line " + std::to_string(i + 1) +
                      ": expected 4 ::-separated fields");
    std::string ctx = "ratings.dat line " + std::to_string(i + 1);
    Interaction x;
    x.user = static_cast<int>(detail::parse_ll(f[0], ctx));
    x.item = static_cast<int>(detail::parse_ll(f[1], ctx));
    x.timestamp = detail::parse_ll(f[3], ctx);
    raw.interactions.push_back(x);
  }

  auto movie_lines = detail::lines_of(read_file(dir / "movies.dat"));
  for (std::size_t i = 0; i < movie_lines.size(); ++i) {
    if (movie_lines[i].empty()) continue;
    auto f = detail::split(movie_lines[i], "::");
    if (f.size() != 3)
      throw DataError("movies.dat line " + std::to_string(i + 1) +
                      ": expected 3 ::-separated fields");
    std::string ctx = "movies.dat line " + std::to_string(i + 1);
    int id = static_cast<int>(detail::parse_ll(f[0], ctx));
    std::vector<std::uint8_t> flags(raw.genre_names.size(), 0);
    for (const auto& g : detail::split(f[2], "|")) {
      auto it = std::find(raw.genre_names.begin(), raw.genre_names.end(), g);
      if (it == raw.genre_names.end())
        throw DataError("movies.dat line " + std::to_string(i + 1) +
                        ": unknown genre '" + g + "'");
      flags[static_cast<std::size_t>(it - raw.genre_names.begin())] = 1;
    }
    raw.item_flags[id] = std::move(flags);
  }
  return raw;
}

// format "" auto-detects from the files present
inline RawCorpus load_raw(const std::filesystem::path& dir,
                          std::string format = "") {
  namespace fs = std::filesystem;
  if (format.empty()) {
    if (fs::exists(dir / "u.data"))
      format = "ml100k";
    else if (fs::exists(dir / "ratings.dat"))
      format = "ml1m";
    else
      throw DataError("no u.data or ratings.dat under " + dir.string());
  }
  if (format == "ml100k") return load_ml100k(dir);
  if (format == "ml1m") return load_ml1m(dir);
  throw ConfigError("unknown dataset format '" + format + "'");
}

namespace detail {

inline std::string samples_tsv(const std::vector<Sample>& samples) {
  std::ostringstream out;
  for (const auto& s : samples) {
    out << s.user << '\t';
    for (std::size_t i = 0; i < s.inputs.size(); ++i) {
      if (i) out << ',';
      out << s.inputs[i];
    }
    out << '\t' << s.target << '\t' << s.timestamp << '\n';
  }
  return out.str();
}

inline std::vector<Sample> parse_samples_tsv(const std::string& text,
                                             const std::string& name) {
  std::vector<Sample> out;
  auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split(lines[i], "\t");
    std::string ctx = name + " line " + std::to_string(i + 1);
    if (f.size() != 4) throw DataError(ctx + ": expected 4 fields");
    Sample s;
    s.user = static_cast<int>(parse_ll(f[0], ctx));
    for (const auto& tok : split(f[1], ","))
      s.inputs.push_back(static_cast<int>(parse_ll(tok, ctx)));
    s.target = static_cast<int>(parse_ll(f[2], ctx));
    s.timestamp = parse_ll(f[3], ctx);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string index_tsv(const std::vector<int>& raw_ids) {
  std::ostringstream out;
  for (std::size_t i = 0; i < raw_ids.size(); ++i)
    out << i << '\t' << raw_ids[i] << '\n';
  return out.str();
}

}  // namespace detail

// Writes the prepared dataset as TSV files plus a manifest with content
// checksums. Output bytes depend only on the dataset, so repeated runs are
// identical.
inline void write_dataset(const std::filesystem::path& dir,
                          const Dataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::string genre_names_txt;
  for (const auto& g : ds.genre_names) genre_names_txt += g + "\n";

  std::ostringstream genres_ss;
  for (int i = 0; i < ds.genres.rows(); ++i) {
    genres_ss << i << '\t';
    for (int g = 0; g < ds.genres.cols(); ++g)
      genres_ss << (ds.genres(i, g) > 0.5 ? '1' : '0');
    genres_ss << '\n';
  }

  std::vector<std::pair<std::string, std::string>> files = {
      {"genre_names.txt", genre_names_txt},
      {"genres.tsv", genres_ss.str()},
      {"users.tsv", detail::index_tsv(ds.user_raw)},
      {"items.tsv", detail::index_tsv(ds.item_raw)},
      {"train.tsv", detail::samples_tsv(ds.train)},
      {"valid.tsv", detail::samples_tsv(ds.valid)},
      {"test.tsv", detail::samples_tsv(ds.test)},
  };

  nlohmann::json manifest;
  manifest["format"] = ds.format;
  manifest["input_len"] = ds.input_len;
  manifest["min_user"] = ds.min_user;
  manifest["min_item"] = ds.min_item;
  manifest["split"] = {{"train", ds.split.train},
                       {"valid", ds.split.valid},
                       {"test", ds.split.test},
                       {"seed", ds.split.seed}};
  manifest["time_cut"] = ds.time_cut;
  manifest["dropped_test"] = ds.dropped_test;
  manifest["stats"] = {{"raw_users", ds.stats.raw_users},
                       {"raw_items", ds.stats.raw_items},
                       {"raw_interactions", ds.stats.raw_interactions},
                       {"users", ds.stats.users},
                       {"items", ds.stats.items},
                       {"interactions", ds.stats.interactions}};
  manifest["counts"] = {{"train", ds.train.size()},
                        {"valid", ds.valid.size()},
                        {"test", ds.test.size()}};
  manifest["genres"] = ds.genre_names.size();
  nlohmann::json sums;
  for (const auto& [name, bytes] : files) sums[name] = fnv1a64_hex(bytes);
  manifest["checksums"] = sums;

  for (const auto& [name, bytes] : files) write_file(dir / name, bytes);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad manifest.json in " + dir.string() + ": " + e.what());
  }

  auto checked_read = [&](const std::string& name) {
    std::string bytes = read_file(dir / name);
    std::string want = manifest.at("checksums").at(name).get<std::string>();
    if (fnv1a64_hex(bytes) != want)
      throw DataError("checksum mismatch for " + (dir / name).string());
    return bytes;
  };

  Dataset ds;
  try {
    ds.format = manifest.at("format").get<std::string>();
    ds.input_len = manifest.at("input_len").get<int>();
    ds.min_user = manifest.at("min_user").get<int>();
    ds.min_item = manifest.at("min_item").get<int>();
    ds.split.train = manifest.at("split").at("train").get<double>();
    ds.split.valid = manifest.at("split").at("valid").get<double>();
    ds.split.test = manifest.at("split").at("test").get<double>();
    ds.split.seed = manifest.at("split").at("seed").get<std::uint64_t>();
    ds.time_cut = manifest.at("time_cut").get<std::int64_t>();
    ds.dropped_test = manifest.at("dropped_test").get<std::size_t>();
    const auto& st = manifest.at("stats");
    ds.stats.raw_users = st.at("raw_users").get<int>();
    ds.stats.raw_items = st.at("raw_items").get<int>();
    ds.stats.raw_interactions = st.at("raw_interactions").get<std::size_t>();
    ds.stats.users = st.at("users").get<int>();
    ds.stats.items = st.at("items").get<int>();
    ds.stats.interactions = st.at("interactions").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest.json missing fields: " + std::string(e.what()));
  }

  for (const auto& g : detail::lines_of(checked_read("genre_names.txt")))
    if (!g.empty()) ds.genre_names.push_back(g);

  {
    auto lines = detail::lines_of(checked_read("genres.tsv"));
    std::vector<std::string> rows;
    for (auto& l : lines)
      if (!l.empty()) rows.push_back(l);
    ds.genres = Mat::Zero(static_cast<int>(rows.size()),
                          static_cast<int>(ds.genre_names.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto f = detail::split(rows[i], "\t");
      if (f.size() != 2 || f[1].size() != ds.genre_names.size())
        throw DataError("genres.tsv line " + std::to_string(i + 1) +
                        ": malformed row");
      for (std::size_t g = 0; g < f[1].size(); ++g)
        ds.genres(static_cast<int>(i), static_cast<int>(g)) =
            f[1][g] == '1' ? 1.0 : 0.0;
    }
  }

  auto parse_index = [&](const std::string& name) {
    std::vector<int> out;
    auto lines = detail::lines_of(checked_read(name));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto f = detail::split(lines[i], "\t");
      std::string ctx = name + " line " + std::to_string(i + 1);
      if (f.size() != 2) throw DataError(ctx + ": expected 2 fields");
      if (detail::parse_ll(f[0], ctx) != static_cast<long long>(out.size()))
        throw DataError(ctx + ": indices must be dense and ascending");
      out.push_back(static_cast<int>(detail::parse_ll(f[1], ctx)));
    }
    return out;
  };
  ds.user_raw = parse_index("users.tsv");
  ds.item_raw = parse_index("items.tsv");

  ds.train = detail::parse_samples_tsv(checked_read("train.tsv"), "train.tsv");
  ds.valid = detail::parse_samples_tsv(checked_read("valid.tsv"), "valid.tsv");
  ds.test = detail::parse_samples_tsv(checked_read("test.tsv"), "test.tsv");

  if (ds.train.size() != manifest.at("counts").at("train").get<std::size_t>() ||
      ds.valid.size() != manifest.at("counts").at("valid").get<std::size_t>() ||
      ds.test.size() != manifest.at("counts").at("test").get<std::size_t>())
    throw DataError("sample counts disagree with manifest in " + dir.string());
  if (static_cast<int>(ds.user_raw.size()) != ds.stats.users ||
      static_cast<int>(ds.item_raw.size()) != ds.stats.items)
    throw DataError("index sizes disagree with manifest in " + dir.string());
  return ds;
}

}  // namespace idsr
