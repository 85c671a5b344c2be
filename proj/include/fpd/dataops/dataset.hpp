#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpd/core/errors.hpp"
#include "fpd/core/rng.hpp"
#include "fpd/dataops/blur.hpp"
#include "fpd/dataops/gabor.hpp"
#include "fpd/dataops/preprocess.hpp"
#include "fpd/dataops/synth.hpp"
#include "fpd/io/png_io.hpp"

namespace fpd {

enum class Split { kTrain, kVal, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    default: return "test";
  }
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split name: " + s);
}

// One training record; images live on disk, referenced by path.
struct SampleRecord {
  std::string subject_id;
  double sigma = 0.0;
  std::string blurred_path;
  std::string clean_path;
  std::string ridge_path;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  int version = 1;
  int crop_size = 0;
  std::vector<SampleRecord> records;

  std::vector<const SampleRecord*> split_records(Split s) const {
    std::vector<const SampleRecord*> out;
    for (const auto& r : records)
      if (r.split == s) out.push_back(&r);
    return out;
  }

  std::set<std::string> subjects(Split s) const {
    std::set<std::string> out;
    for (const auto& r : records)
      if (r.split == s) out.insert(r.subject_id);
    return out;
  }

  std::map<double, int> counts_per_sigma() const {
    std::map<double, int> out;
    for (const auto& r : records) out[r.sigma]++;
    return out;
  }

  bool operator==(const DatasetManifest& o) const {
    if (version != o.version || crop_size != o.crop_size || records.size() != o.records.size())
      return false;
    for (size_t i = 0; i < records.size(); ++i) {
      const auto& a = records[i];
      const auto& b = o.records[i];
      if (a.subject_id != b.subject_id || a.sigma != b.sigma ||
          a.blurred_path != b.blurred_path || a.clean_path != b.clean_path ||
          a.ridge_path != b.ridge_path || a.split != b.split)
        return false;
    }
    return true;
  }
};

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
  nlohmann::json j;
  j["version"] = m.version;
  j["crop_size"] = m.crop_size;
  j["records"] = nlohmann::json::array();
  for (const auto& r : m.records) {
    j["records"].push_back({{"subject_id", r.subject_id},
                            {"sigma", r.sigma},
                            {"blurred_path", r.blurred_path},
                            {"clean_path", r.clean_path},
                            {"ridge_path", r.ridge_path},
                            {"split", split_name(r.split)}});
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest: " + path);
  os << j.dump(2) << "\n";
}

inline DatasetManifest load_manifest(const std::string& path, bool check_files = true) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read manifest: " + path);
  nlohmann::json j;
  is >> j;
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  m.crop_size = j.at("crop_size").get<int>();
  std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (const auto& rj : j.at("records")) {
    SampleRecord r;
    r.subject_id = rj.at("subject_id").get<std::string>();
    r.sigma = rj.at("sigma").get<double>();
    r.blurred_path = rj.at("blurred_path").get<std::string>();
    r.clean_path = rj.at("clean_path").get<std::string>();
    r.ridge_path = rj.at("ridge_path").get<std::string>();
    r.split = split_from_name(rj.at("split").get<std::string>());
    if (check_files) {
      for (const std::string& p : {r.blurred_path, r.clean_path, r.ridge_path})
        if (!std::filesystem::exists(base / p))
          throw DataError("manifest references missing file: " + p);
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

// Paths inside a manifest are relative to the manifest's directory.
inline std::string resolve_path(const std::string& manifest_path, const std::string& rel) {
  return (std::filesystem::path(manifest_path).parent_path() / rel).string();
}

struct DatasetSpec {
  // Synthetic source (used when source_dir is empty).
  int synthetic_subjects = 0;
  int impressions = 4;
  int image_size = 96;
  // Directory source: PNGs named <subject>_<impression>.png.
  std::string source_dir;

  std::vector<double> sigmas{3.0, 5.0, 7.0};
  int crop_size = 64;
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  std::uint64_t seed = 1;
  GaborParams gabor{};
};

namespace detail {

struct CleanImage {
  std::string subject_id;
  std::string stem;  // file stem for outputs
  GrayImage image;
};

inline std::vector<CleanImage> collect_clean_images(const DatasetSpec& spec) {
  std::vector<CleanImage> out;
  if (!spec.source_dir.empty()) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(spec.source_dir))
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::string stem = f.stem().string();
      auto pos = stem.rfind('_');
      std::string subject = pos == std::string::npos ? stem : stem.substr(0, pos);
      out.push_back({subject, stem, read_png(f.string())});
    }
  } else {
    if (spec.synthetic_subjects < 1)
      throw ConfigError("dataset: need synthetic_subjects >= 1 or a source directory");
    for (int s = 0; s < spec.synthetic_subjects; ++s) {
      std::uint64_t subject_seed = splitmix64(spec.seed) + static_cast<std::uint64_t>(s);
      char subject[16];
      std::snprintf(subject, sizeof(subject), "s%03d", s);
      for (int i = 0; i < spec.impressions; ++i) {
        auto [img, core] = synth_impression(subject_seed, i, spec.image_size);
        (void)core;
        char stem[32];
        std::snprintf(stem, sizeof(stem), "%s_%02d", subject, i);
        out.push_back({subject, stem, std::move(img)});
      }
    }
  }
  if (out.empty()) throw DataError("dataset: source produced no images");
  return out;
}

}  // namespace detail

// Builds the paired blurred/clean/ridge corpus. For every accepted clean
// image and every sigma one record is emitted; splits are disjoint by
// subject. All images are written as 8-bit PNG; the blurred image is
// derived from the already-quantized clean image so it can be recomputed
// bit-exactly from the stored files.
inline DatasetManifest build_dataset(const DatasetSpec& spec, const std::string& out_dir) {
  if (spec.sigmas.empty()) throw ConfigError("dataset: need at least one sigma");
  for (double s : spec.sigmas)
    if (s <= 0) throw ConfigError("dataset: sigmas must be positive");

  std::filesystem::create_directories(std::filesystem::path(out_dir) / "images");

  std::vector<detail::CleanImage> cleans = detail::collect_clean_images(spec);

  // Subject-disjoint splits.
  std::vector<std::string> subjects;
  for (const auto& c : cleans)
    if (subjects.empty() || subjects.back() != c.subject_id) subjects.push_back(c.subject_id);
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  Rng split_rng = Rng::derive(spec.seed, 0x5e17);
  split_rng.shuffle(subjects);
  size_t n_train = static_cast<size_t>(std::lround(spec.train_fraction * subjects.size()));
  size_t n_val = static_cast<size_t>(std::lround(spec.val_fraction * subjects.size()));
  n_train = std::min(n_train, subjects.size());
  n_val = std::min(n_val, subjects.size() - n_train);
  std::map<std::string, Split> split_of;
  for (size_t i = 0; i < subjects.size(); ++i)
    split_of[subjects[i]] =
        i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);

  DatasetManifest manifest;
  manifest.crop_size = spec.crop_size;

  for (const auto& c : cleans) {
    GrayImage cropped;
    try {
      cropped = preprocess_sample(c.image, spec.crop_size, spec.gabor);
    } catch (const SampleRejected& e) {
      std::cerr << "skipping " << c.stem << ": " << e.what() << "\n";
      continue;
    }
    GrayImage clean_q = cropped.quantized();
    GrayImage ridge = gabor_ridge_map(clean_q, spec.gabor);

    std::string clean_rel = "images/" + c.stem + "_clean.png";
    std::string ridge_rel = "images/" + c.stem + "_ridge.png";
    write_png(out_dir + "/" + clean_rel, clean_q);
    write_png(out_dir + "/" + ridge_rel, ridge);

    for (double sigma : spec.sigmas) {
      GrayImage blurred = gaussian_blur(clean_q, BlurConfig::from_sigma(sigma)).quantized();
      char sig[32];
      std::snprintf(sig, sizeof(sig), "%g", sigma);
      std::string blur_rel = "images/" + c.stem + "_blur_s" + sig + ".png";
      write_png(out_dir + "/" + blur_rel, blurred);
      manifest.records.push_back(
          {c.subject_id, sigma, blur_rel, clean_rel, ridge_rel, split_of[c.subject_id]});
    }
  }
  if (manifest.records.empty()) throw DataError("dataset: every sample was rejected");

  save_manifest(manifest, out_dir + "/manifest.json");
  return manifest;
}

}  // namespace fpd
