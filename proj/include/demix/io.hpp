#pragma once

#include "demix/binning.hpp"
#include "demix/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace demix {

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

/// A grouped sample together with the group labels found in the file.
struct LabeledSample {
  GroupedSample sample;
  std::vector<std::string> group_ids;  // first-appearance order
};

/// CSV rows `group_id,x_1,...,x_d`, optional header. Rows of one group need
/// not be contiguous; groups keep the order of their first row.
LabeledSample read_sample_csv(const std::filesystem::path& path);
void write_sample_csv(const std::filesystem::path& path, const GroupedSample& sample,
                      const std::vector<std::string>& group_ids = {});

/// Little-endian binary layout: "DMXS", u32 version, u64 P, u64 d, u64 n,
/// n u64 group sizes, then the P x d points column by column as f64.
GroupedSample read_sample_binary(const std::filesystem::path& path);
void write_sample_binary(const std::filesystem::path& path, const GroupedSample& sample);

/// Picks the reader from the extension (.bin means binary, anything else CSV).
LabeledSample read_sample(const std::filesystem::path& path);

/// Plain numeric CSV; a first line with any non-numeric field is a header.
Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& values,
                      const std::vector<std::string>& header = {});

std::string partition_to_json(const BinPartition& partition);
BinPartition partition_from_json(const std::string& text);

/// "DMXW", u32 version, u64 P, u64 d, u64 K, then points and weights, each
/// column by column as f64.
void write_weights_binary(const std::filesystem::path& path, const Matrix& points, const Matrix& weights);

/// Whole file as a string; input_error naming the path when it cannot be read.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace demix
