#include "segforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace segforge {

std::string to_string(Source s) {
  switch (s) {
    case Source::montgomery: return "montgomery";
    case Source::shenzhen: return "shenzhen";
    case Source::synthetic: return "synthetic";
  }
  return "?";
}

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Source parse_source(const std::string& s) {
  if (s == "montgomery") return Source::montgomery;
  if (s == "shenzhen") return Source::shenzhen;
  if (s == "synthetic") return Source::synthetic;
  throw data_error("unknown source '" + s + "' (expected montgomery|shenzhen|synthetic)");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw data_error("unknown split '" + s + "' (expected train|test)");
}

std::size_t DatasetManifest::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [s](const ManifestEntry& e) { return e.split == s; }));
}

std::vector<ManifestEntry> DatasetManifest::select(Split s) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [s](const ManifestEntry& e) { return e.split == s; });
  return out;
}

std::filesystem::path DatasetManifest::resolve(const std::filesystem::path& p) const {
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const std::string& origin) {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) -> Error {
    return data_error(origin + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() < 5 || fields.size() > 6)
      throw fail("expected 5 or 6 tab-separated fields, found " + std::to_string(fields.size()));
    ManifestEntry e;
    e.id = fields[0];
    if (e.id.empty()) throw fail("empty id");
    try {
      e.source = parse_source(fields[1]);
      e.split = parse_split(fields[2]);
    } catch (const Error& err) {
      throw fail(err.what());
    }
    e.image = fields[3];
    e.mask = fields[4];
    if (fields.size() == 6) e.mask2 = fields[5];
    if (e.image.empty() || e.mask.empty()) throw fail("empty path for id '" + e.id + "'");
    if (e.source == Source::montgomery && e.mask2.empty())
      throw fail("montgomery entry '" + e.id + "' needs both left and right lobe mask paths");
    if (e.source != Source::montgomery && !e.mask2.empty())
      throw fail("entry '" + e.id + "': only montgomery entries take a second mask path");
    if (!seen.insert(e.id).second) throw fail("duplicate id '" + e.id + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open manifest: " + path.string());
  DatasetManifest m = parse_manifest(in, path.parent_path(), path.string());
  std::vector<std::string> missing;
  for (const auto& e : m.entries) {
    std::vector<std::filesystem::path> files{e.image, e.mask};
    if (e.has_lobes()) files.push_back(e.mask2);
    for (const auto& f : files)
      if (!std::filesystem::exists(m.resolve(f))) missing.push_back(e.id + ": " + m.resolve(f).string());
  }
  if (!missing.empty()) {
    std::string msg = "manifest " + path.string() + " references missing files:";
    for (const auto& s : missing) msg += "\n  " + s;
    throw data_error(msg);
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  const auto dir = std::filesystem::absolute(path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  auto rel = [&](const std::filesystem::path& p) {
    const auto abs = std::filesystem::absolute(manifest.resolve(p));
    const auto r = abs.lexically_proximate(dir);
    return (r.empty() ? abs : r).generic_string();
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write manifest: " + path.string());
  out << "# id\tsource\tsplit\timage\tmask[\tmask2]\n";
  for (const auto& e : manifest.entries) {
    out << e.id << '\t' << to_string(e.source) << '\t' << to_string(e.split) << '\t' << rel(e.image)
        << '\t' << rel(e.mask);
    if (e.has_lobes()) out << '\t' << rel(e.mask2);
    out << '\n';
  }
  if (!out) throw runtime_error("failed writing manifest: " + path.string());
}

DatasetManifest split(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    throw usage_error("train fraction must lie in [0,1]");
  DatasetManifest out = manifest;
  std::map<Source, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < out.entries.size(); ++i) groups[out.entries[i].source].push_back(i);

  const auto total = static_cast<std::int64_t>(std::llround(train_fraction * static_cast<double>(out.entries.size())));
  struct Quota {
    Source source;
    std::int64_t n;
    double remainder;
  };
  std::vector<Quota> quotas;
  std::int64_t assigned = 0;
  for (const auto& [src, idx] : groups) {
    const double exact = train_fraction * static_cast<double>(idx.size());
    const auto base = static_cast<std::int64_t>(std::floor(exact + 1e-9));
    quotas.push_back({src, base, exact - static_cast<double>(base)});
    assigned += base;
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return quotas[a].remainder > quotas[b].remainder; });
  for (std::size_t k = 0; assigned < total && k < order.size(); ++k, ++assigned) ++quotas[order[k]].n;

  std::mt19937_64 rng(seed);
  for (const auto& q : quotas) {
    auto idx = groups[q.source];
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < idx.size(); ++k)
      out.entries[idx[k]].split = static_cast<std::int64_t>(k) < q.n ? Split::train : Split::test;
  }
  return out;
}

BinaryMask merge_lobes(const BinaryMask& left, const BinaryMask& right, const StructuringElement& se,
                       int iterations) {
  require_same_shape(left, right, "merge_lobes");
  return dilate(mask_union(left, right), se, iterations);
}

BinaryMask merge_lobes(const BinaryMask& left, const BinaryMask& right, const LobeMergeConfig& cfg) {
  return merge_lobes(left, right, StructuringElement::square(cfg.se_size), cfg.iterations);
}

void validate_sample(const Sample& s) {
  if (s.image.height() != s.mask.height()) throw ShapeError("sample " + s.id, "height", s.image.height(), s.mask.height());
  if (s.image.width() != s.mask.width()) throw ShapeError("sample " + s.id, "width", s.image.width(), s.mask.width());
}

Sample load_sample(const DatasetManifest& manifest, const ManifestEntry& entry,
                   const LobeMergeConfig& lobes, const WarningSink& warn) {
  Sample s;
  s.id = entry.id;
  s.image = read_image_png(manifest.resolve(entry.image));
  if (entry.has_lobes()) {
    const BinaryMask left = read_mask_png(manifest.resolve(entry.mask), warn);
    const BinaryMask right = read_mask_png(manifest.resolve(entry.mask2), warn);
    if (!left.same_shape(right))
      throw data_error("sample " + entry.id + ": left and right lobe masks differ in size");
    s.mask = merge_lobes(left, right, lobes);
  } else {
    s.mask = read_mask_png(manifest.resolve(entry.mask), warn);
  }
  validate_sample(s);
  return s;
}

Sample resize_sample(const Sample& s, int h, int w) {
  return Sample{s.id, resize_bilinear(s.image, h, w), resize_nearest(s.mask, h, w)};
}

}  // namespace segforge
