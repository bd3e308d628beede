#include "demix/io.hpp"

#include "json.hpp"

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>
#include <unordered_map>

namespace demix {

namespace fs = std::filesystem;

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::input, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::input, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::input, "write failed for " + path.string());
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view field, double& value) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto result = std::from_chars(field.data(), field.data() + field.size(), value);
  return result.ec == std::errc() && result.ptr == field.data() + field.size();
}

std::vector<std::string_view> lines_of(const std::string& text) {
  std::vector<std::string_view> out;
  std::string_view rest(text);
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    if (!trim(line).empty()) out.push_back(line);
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  return out;
}

template <typename T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& offset, const fs::path& path) {
  if (offset + sizeof(T) > in.size()) fail(ErrorKind::input, "truncated binary file " + path.string());
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace

LabeledSample read_sample_csv(const fs::path& path) {
  const std::string text = read_text(path);
  const auto lines = lines_of(text);
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows_by_group;
  Index dimension = -1;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r]);
    if (fields.size() < 2) {
      fail(ErrorKind::input, path.string() + ":" + std::to_string(r + 1) + ": expected group_id and coordinates");
    }
    std::vector<double> coords(fields.size() - 1);
    bool numeric = true;
    for (std::size_t c = 1; c < fields.size(); ++c) numeric = numeric && parse_double(fields[c], coords[c - 1]);
    if (!numeric) {
      if (r == 0) continue;  // header
      fail(ErrorKind::input, path.string() + ":" + std::to_string(r + 1) + ": non-numeric coordinate");
    }
    if (dimension < 0) dimension = static_cast<Index>(coords.size());
    if (static_cast<Index>(coords.size()) != dimension) {
      fail(ErrorKind::input, path.string() + ":" + std::to_string(r + 1) + ": inconsistent column count");
    }
    const std::string id(fields[0]);
    auto [it, inserted] = slot.try_emplace(id, ids.size());
    if (inserted) {
      ids.push_back(id);
      rows_by_group.emplace_back();
    }
    auto& bucket = rows_by_group[it->second];
    bucket.insert(bucket.end(), coords.begin(), coords.end());
  }
  if (ids.empty()) fail(ErrorKind::input, path.string() + ": no data rows");

  std::vector<Index> sizes;
  Index total = 0;
  for (const auto& bucket : rows_by_group) {
    sizes.push_back(static_cast<Index>(bucket.size()) / dimension);
    total += sizes.back();
  }
  Matrix points(total, dimension);
  Index row = 0;
  for (const auto& bucket : rows_by_group)
    for (std::size_t p = 0; p < bucket.size(); p += static_cast<std::size_t>(dimension), ++row)
      for (Index c = 0; c < dimension; ++c) points(row, c) = bucket[p + static_cast<std::size_t>(c)];
  return {GroupedSample(std::move(points), std::move(sizes)), std::move(ids)};
}

void write_sample_csv(const fs::path& path, const GroupedSample& sample, const std::vector<std::string>& group_ids) {
  std::string out = "group_id";
  for (Index c = 0; c < sample.dimension(); ++c) out += ",x_" + std::to_string(c + 1);
  out += '\n';
  for (Index i = 0; i < sample.group_count(); ++i) {
    const std::string id =
        group_ids.empty() ? std::to_string(i + 1) : group_ids.at(static_cast<std::size_t>(i));
    for (Index j = 0; j < sample.group_size(i); ++j) {
      out += id;
      for (Index c = 0; c < sample.dimension(); ++c) out += "," + format_double(sample.point(i, j)(c));
      out += '\n';
    }
  }
  write_text(path, out);
}

GroupedSample read_sample_binary(const fs::path& path) {
  const std::string data = read_text(path);
  if (data.size() < 4 || data.compare(0, 4, "DMXS") != 0) fail(ErrorKind::input, path.string() + ": bad magic");
  std::size_t offset = 4;
  const auto version = take<std::uint32_t>(data, offset, path);
  if (version != 1) fail(ErrorKind::input, path.string() + ": unsupported version " + std::to_string(version));
  const auto total = static_cast<Index>(take<std::uint64_t>(data, offset, path));
  const auto dimension = static_cast<Index>(take<std::uint64_t>(data, offset, path));
  const auto groups = static_cast<Index>(take<std::uint64_t>(data, offset, path));
  std::vector<Index> sizes(static_cast<std::size_t>(groups));
  Index sum = 0;
  for (auto& s : sizes) {
    s = static_cast<Index>(take<std::uint64_t>(data, offset, path));
    sum += s;
  }
  if (sum != total) fail(ErrorKind::input, path.string() + ": group sizes do not add up to P");
  Matrix points(total, dimension);
  for (Index c = 0; c < dimension; ++c)
    for (Index r = 0; r < total; ++r) points(r, c) = take<double>(data, offset, path);
  return GroupedSample(std::move(points), std::move(sizes));
}

void write_sample_binary(const fs::path& path, const GroupedSample& sample) {
  std::string out = "DMXS";
  put<std::uint32_t>(out, 1);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(sample.total_points()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(sample.dimension()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(sample.group_count()));
  for (Index i = 0; i < sample.group_count(); ++i) put<std::uint64_t>(out, static_cast<std::uint64_t>(sample.group_size(i)));
  for (Index c = 0; c < sample.dimension(); ++c)
    for (Index r = 0; r < sample.total_points(); ++r) put<double>(out, sample.points()(r, c));
  write_text(path, out);
}

LabeledSample read_sample(const fs::path& path) {
  if (path.extension() == ".bin") {
    GroupedSample sample = read_sample_binary(path);
    std::vector<std::string> ids;
    for (Index i = 0; i < sample.group_count(); ++i) ids.push_back(std::to_string(i + 1));
    return {std::move(sample), std::move(ids)};
  }
  return read_sample_csv(path);
}

Matrix read_matrix_csv(const fs::path& path) {
  const std::string text = read_text(path);
  const auto lines = lines_of(text);
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r]);
    std::vector<double> values(fields.size());
    bool numeric = true;
    for (std::size_t c = 0; c < fields.size(); ++c) numeric = numeric && parse_double(fields[c], values[c]);
    if (!numeric) {
      if (r == 0) continue;
      fail(ErrorKind::input, path.string() + ":" + std::to_string(r + 1) + ": non-numeric field");
    }
    if (!rows.empty() && values.size() != rows.front().size()) {
      fail(ErrorKind::input, path.string() + ":" + std::to_string(r + 1) + ": inconsistent column count");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) fail(ErrorKind::input, path.string() + ": no data rows");
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < out.rows(); ++r)
    for (Index c = 0; c < out.cols(); ++c) out(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return out;
}

void write_matrix_csv(const fs::path& path, const Matrix& values, const std::vector<std::string>& header) {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  if (!header.empty()) out += '\n';
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) {
      if (c) out += ',';
      out += format_double(values(r, c));
    }
    out += '\n';
  }
  write_text(path, out);
}

std::string partition_to_json(const BinPartition& partition) {
  nlohmann::ordered_json j;
  j["dimension"] = partition.dimension();
  j["bins"] = partition.bin_count();
  if (partition.nodes().empty()) {
    j["kind"] = "intervals";
    j["breakpoints"] = partition.breakpoints();
  } else {
    j["kind"] = "tree";
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& node : partition.nodes()) {
      nodes.push_back({{"axis", node.axis},
                       {"threshold", node.threshold},
                       {"left", node.left},
                       {"right", node.right},
                       {"leaf", node.leaf}});
    }
    j["nodes"] = nodes;
  }
  return j.dump(2);
}

BinPartition partition_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("kind") == "intervals") return BinPartition::from_breakpoints(j.at("breakpoints").get<std::vector<double>>());
    std::vector<BinPartition::Node> nodes;
    for (const auto& n : j.at("nodes")) {
      nodes.push_back({n.at("axis").get<Index>(), n.at("threshold").get<double>(), n.at("left").get<Index>(),
                       n.at("right").get<Index>(), n.at("leaf").get<Index>()});
    }
    return BinPartition::from_tree(j.at("dimension").get<Index>(), std::move(nodes));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::input, std::string("partition json: ") + e.what());
  }
}

void write_weights_binary(const fs::path& path, const Matrix& points, const Matrix& weights) {
  if (points.rows() != weights.rows()) fail(ErrorKind::input, "weights dump: row counts differ");
  std::string out = "DMXW";
  put<std::uint32_t>(out, 1);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(points.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(points.cols()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(weights.cols()));
  for (Index c = 0; c < points.cols(); ++c)
    for (Index r = 0; r < points.rows(); ++r) put<double>(out, points(r, c));
  for (Index c = 0; c < weights.cols(); ++c)
    for (Index r = 0; r < weights.rows(); ++r) put<double>(out, weights(r, c));
  write_text(path, out);
}

}  // namespace demix
