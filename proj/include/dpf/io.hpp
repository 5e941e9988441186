#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dpf/lattice.hpp"

namespace dpf::io {

struct Dataset {
  lattice::ProblemShape shape;
  std::vector<lattice::LatticeState> states;
};

/// Header line "K S N", then one state per line as space-separated digits.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);

/// CSV with columns index,probability.
void write_distribution_csv(const std::filesystem::path& path, const lattice::DenseDistribution& dist);

/// Writes `text` atomically enough for batch use: temp file then rename.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Shortest round-trip decimal form, identical across runs.
std::string format_double(double v);

}  // namespace dpf::io
