#pragma once

#include <istream>
#include <ostream>

#include "pushdyn/binio.hpp"
#include "pushdyn/cloud.hpp"

namespace pushdyn {

// PPC1 record: magic "PPC1", u32 N, then the N x 7 feature matrix as
// little-endian f32 in column-major order (channel by channel: all x, all y,
// all z, all m, all vx, all vy, all vz), then N u8 labels.

inline void write_ppc1(std::ostream& os, const PhysPointCloud& cloud) {
  BinWriter w{os};
  w.array("PPC1", 4);
  w.pod(static_cast<std::uint32_t>(cloud.size()));
  Eigen::Matrix<float, Eigen::Dynamic, kCloudChannels> f = cloud.feats.cast<float>();
  w.array(f.data(), static_cast<std::size_t>(f.size()));
  w.array(reinterpret_cast<const std::uint8_t*>(cloud.labels.data()), cloud.labels.size());
}

inline PhysPointCloud read_ppc1(std::istream& is) {
  BinReader r{is};
  char magic[4];
  r.array(magic, 4);
  if (std::string(magic, 4) != "PPC1") throw std::runtime_error("PPC1: bad magic");
  const auto n = r.pod<std::uint32_t>();
  PhysPointCloud cloud(static_cast<int>(n));
  Eigen::Matrix<float, Eigen::Dynamic, kCloudChannels> f(n, kCloudChannels);
  r.array(f.data(), static_cast<std::size_t>(f.size()));
  cloud.feats = f.cast<double>();
  r.array(reinterpret_cast<std::uint8_t*>(cloud.labels.data()), cloud.labels.size());
  return cloud;
}

}  // namespace pushdyn
