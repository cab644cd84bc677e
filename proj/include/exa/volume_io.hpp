#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "exa/volume.hpp"

#ifdef EXA_WITH_HDF5
#include <hdf5.h>
#endif

namespace exa {

enum class VolumeFormat { raw3d, hdf5 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

inline void to_little_endian(std::vector<float>& v) {
  if constexpr (std::endian::native == std::endian::big) {
    for (float& f : v) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      u = byteswap32(u);
      std::memcpy(&f, &u, 4);
    }
  }
}

// "name", "name.json" and "name.f32" all resolve to the same pair of files.
inline std::filesystem::path raw3d_base(const std::filesystem::path& p) {
  auto ext = p.extension();
  if (ext == ".json" || ext == ".f32") return p.parent_path() / p.stem();
  return p;
}

}  // namespace detail

inline void write_raw3d(const std::filesystem::path& path, const Volume3D& vol) {
  auto base = detail::raw3d_base(path);
  nlohmann::json meta = {
      {"dims", {vol.dims().nx, vol.dims().ny, vol.dims().nz}},
      {"spacing_um", vol.spacing_um()},
      {"dtype", "f32le"},
  };
  std::ofstream js(base.string() + ".json");
  if (!js) throw IoError("cannot write " + base.string() + ".json");
  js << meta.dump(2) << "\n";
  std::vector<float> payload = vol.values();
  detail::to_little_endian(payload);
  std::ofstream bin(base.string() + ".f32", std::ios::binary);
  if (!bin) throw IoError("cannot write " + base.string() + ".f32");
  bin.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!bin) throw IoError("short write to " + base.string() + ".f32");
}

inline Volume3D read_raw3d(const std::filesystem::path& path) {
  auto base = detail::raw3d_base(path);
  const std::string json_path = base.string() + ".json", bin_path = base.string() + ".f32";
  std::ifstream js(json_path);
  if (!js) throw IoError("missing file " + json_path);
  nlohmann::json meta;
  try {
    js >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar " + json_path + ": " + e.what());
  }
  if (!meta.contains("dims") || meta["dims"].size() != 3) throw IoError("sidecar lacks dims[3]");
  if (meta.value("dtype", std::string("f32le")) != "f32le") throw IoError("unsupported dtype");
  Dims d{meta["dims"][0].get<std::size_t>(), meta["dims"][1].get<std::size_t>(),
         meta["dims"][2].get<std::size_t>()};
  double spacing = meta.value("spacing_um", 1.0);

  std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
  if (!bin) throw IoError("missing file " + bin_path);
  const auto bytes = static_cast<std::size_t>(bin.tellg());
  if (bytes != d.count() * sizeof(float))
    throw IoError("payload size " + std::to_string(bytes) + " bytes does not match dims " +
                  to_string(d) + " (" + std::to_string(d.count() * sizeof(float)) + " bytes)");
  bin.seekg(0);
  std::vector<float> values(d.count());
  bin.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  detail::to_little_endian(values);
  try {
    return Volume3D(d, std::move(values), spacing);
  } catch (const std::invalid_argument& e) {
    throw IoError(bin_path + ": " + e.what());
  }
}

#ifdef EXA_WITH_HDF5
// Reads a 3D float dataset; HDF5 stores C order (slowest first), so the
// dataset extent (nz, ny, nx) maps directly onto the x-fastest layout.
inline Volume3D read_hdf5(const std::filesystem::path& path, const std::string& dataset) {
  if (!std::filesystem::exists(path)) throw IoError("missing file " + path.string());
  hid_t file = H5Fopen(path.string().c_str(), H5F_ACC_RDONLY, H5P_DEFAULT);
  if (file < 0) throw IoError("cannot open HDF5 file " + path.string());
  hid_t ds = H5Dopen2(file, dataset.c_str(), H5P_DEFAULT);
  if (ds < 0) {
    H5Fclose(file);
    throw IoError("dataset " + dataset + " not found in " + path.string());
  }
  hid_t space = H5Dget_space(ds);
  hsize_t ext[3] = {0, 0, 0};
  const int rank = H5Sget_simple_extent_ndims(space);
  if (rank == 3) H5Sget_simple_extent_dims(space, ext, nullptr);
  H5Sclose(space);
  if (rank != 3) {
    H5Dclose(ds);
    H5Fclose(file);
    throw IoError("dataset " + dataset + " is not 3-dimensional");
  }
  Dims d{static_cast<std::size_t>(ext[2]), static_cast<std::size_t>(ext[1]),
         static_cast<std::size_t>(ext[0])};
  std::vector<float> values(d.count());
  herr_t st = H5Dread(ds, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, values.data());
  H5Dclose(ds);
  H5Fclose(file);
  if (st < 0) throw IoError("failed reading dataset " + dataset);
  try {
    return Volume3D(d, std::move(values));
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}
#endif

inline bool hdf5_available() {
#ifdef EXA_WITH_HDF5
  return true;
#else
  return false;
#endif
}

inline Volume3D import_volume(const std::filesystem::path& path, VolumeFormat format,
                              const std::string& hdf5_dataset = "/data") {
  switch (format) {
    case VolumeFormat::raw3d:
      return read_raw3d(path);
    case VolumeFormat::hdf5:
#ifdef EXA_WITH_HDF5
      return read_hdf5(path, hdf5_dataset);
#else
      (void)hdf5_dataset;
      throw IoError("built without HDF5 support");
#endif
  }
  throw IoError("unknown volume format");
}

}  // namespace exa
