#include "dpf/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dpf/errors.hpp"

namespace dpf::io {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc()) throw InternalError("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataIntegrityError("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw DataIntegrityError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataIntegrityError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::string text;
  text += std::to_string(data.shape.dims()) + ' ' + std::to_string(data.shape.states()) + ' ' +
          std::to_string(data.states.size()) + '\n';
  for (const auto& s : data.states) {
    lattice::validate_state(data.shape, s);
    for (std::size_t l = 0; l < s.size(); ++l) {
      if (l) text += ' ';
      text += std::to_string(int(s[l]));
    }
    text += '\n';
  }
  write_text(path, text);
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  long k = 0, s = 0, n = 0;
  if (!(in >> k >> s >> n) || k < 1 || s < 2 || n < 0) {
    throw DataIntegrityError(path.string() + ": malformed header, expected \"K S N\"");
  }
  Dataset data{lattice::ProblemShape(int(k), int(s)), {}};
  data.states.reserve(static_cast<std::size_t>(n));
  for (long row = 0; row < n; ++row) {
    lattice::LatticeState st(static_cast<std::size_t>(k));
    for (long l = 0; l < k; ++l) {
      long d = -1;
      if (!(in >> d)) throw DataIntegrityError(path.string() + ": truncated at state " + std::to_string(row));
      if (d < 0 || d >= s) {
        throw DataIntegrityError(path.string() + ": digit out of range at state " + std::to_string(row));
      }
      st[static_cast<std::size_t>(l)] = static_cast<lattice::LatticeState::Digit>(d);
    }
    data.states.push_back(std::move(st));
  }
  std::string extra;
  if (in >> extra) throw DataIntegrityError(path.string() + ": more states than the header declares");
  return data;
}

void write_distribution_csv(const std::filesystem::path& path, const lattice::DenseDistribution& dist) {
  std::string text = "index,probability\n";
  for (Eigen::Index i = 0; i < dist.probs.size(); ++i) {
    text += std::to_string(i) + ',' + format_double(dist.probs[i]) + '\n';
  }
  write_text(path, text);
}

}  // namespace dpf::io
