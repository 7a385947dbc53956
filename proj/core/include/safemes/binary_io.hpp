#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "safemes/common.hpp"

namespace safemes {

/// Little helpers for the versioned checkpoint format. Values are written in
/// host byte order; checkpoints are not meant to move between architectures.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void write(const T& value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  void write_string(const std::string& s) {
    write<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  void write_vector(const Eigen::VectorXd& v) {
    write<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void write_pod_vector(const std::vector<T>& v) {
    write<std::uint64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }

  bool good() const { return out_.good(); }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T read() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in_) throw Error("checkpoint truncated");
    return value;
  }

  std::string read_string() {
    const auto n = read<std::uint64_t>();
    if (n > (1ULL << 32)) throw Error("checkpoint string length is implausible");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw Error("checkpoint truncated");
    return s;
  }

  Eigen::VectorXd read_vector() {
    const auto n = read<std::uint64_t>();
    if (n > (1ULL << 34) / sizeof(double)) throw Error("checkpoint vector length is implausible");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in_) throw Error("checkpoint truncated");
    return v;
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  std::vector<T> read_pod_vector() {
    const auto n = read<std::uint64_t>();
    if (n > (1ULL << 34) / sizeof(T)) throw Error("checkpoint vector length is implausible");
    std::vector<T> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in_) throw Error("checkpoint truncated");
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace safemes
