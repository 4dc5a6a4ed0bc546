#include "relsal/harness/manifest.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "relsal/error.hpp"

namespace relsal::harness {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string where(const fs::path& manifest, std::size_t line) {
  return manifest.string() + ":" + std::to_string(line);
}

fs::path required_path(const json& obj, const char* key, const fs::path& base,
                       const std::string& loc) {
  if (!obj.contains(key) || !obj[key].is_string()) {
    throw IoError(loc + ": missing string field \"" + key + "\"");
  }
  fs::path p = obj[key].get<std::string>();
  return p.is_absolute() ? p : base / p;
}

void require_exists(const fs::path& p, const std::string& id, const char* what) {
  if (!fs::is_regular_file(p)) {
    throw IoError("record " + id + ": " + what + " file not found: " + p.string());
  }
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open manifest " + path.string());
  }
  const fs::path base = path.parent_path();
  DatasetManifest manifest;
  manifest.source = path;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    const std::string loc = where(path, line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(loc + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) {
      throw IoError(loc + ": expected a JSON object");
    }
    ManifestRecord rec;
    if (!obj.contains("id") || !obj["id"].is_string() || obj["id"].get<std::string>().empty()) {
      throw IoError(loc + ": missing non-empty string field \"id\"");
    }
    rec.id = obj["id"].get<std::string>();
    if (!seen.insert(rec.id).second) {
      throw IoError(loc + ": duplicate image id " + rec.id);
    }
    rec.image = required_path(obj, "image", base, loc);
    rec.agreement = required_path(obj, "agreement", base, loc);
    rec.instances = required_path(obj, "instances", base, loc);
    if (obj.contains("count") && !obj["count"].is_null()) {
      if (!obj["count"].is_number_integer() || obj["count"].get<int>() < 0) {
        throw RangeError(loc + ": count must be a non-negative integer");
      }
      rec.count = obj["count"].get<int>();
    }
    if (obj.contains("n_observers")) {
      if (!obj["n_observers"].is_number_integer()) {
        throw RangeError(loc + ": n_observers must be an integer");
      }
      rec.n_observers = obj["n_observers"].get<int>();
      if (rec.n_observers < 1 || rec.n_observers > AgreementMap::kMaxObservers) {
        throw RangeError(loc + ": n_observers out of range");
      }
    }
    require_exists(rec.image, rec.id, "image");
    require_exists(rec.agreement, rec.id, "agreement");
    require_exists(rec.instances, rec.id, "instance");
    manifest.records.push_back(std::move(rec));
  }
  if (manifest.records.empty()) {
    throw IoError("manifest " + path.string() + " contains no records");
  }
  for (const auto& rec : manifest.records) {
    const ImageData image = read_image(rec.image);
    const ImageData agreement = read_image(rec.agreement);
    const ImageData instances = read_image(rec.instances);
    if (image.width != agreement.width || image.height != agreement.height ||
        image.width != instances.width || image.height != instances.height) {
      throw ShapeError("record " + rec.id + ": dimension mismatch (image " +
                       std::to_string(image.width) + "x" + std::to_string(image.height) +
                       ", agreement " + std::to_string(agreement.width) + "x" +
                       std::to_string(agreement.height) + ", instances " +
                       std::to_string(instances.width) + "x" + std::to_string(instances.height) +
                       ")");
    }
  }
  return manifest;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write manifest " + path.string());
  }
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  auto rel = [&](const fs::path& p) {
    const fs::path r = p.lexically_relative(base);
    return (r.empty() ? p : r).generic_string();
  };
  for (const auto& rec : records) {
    json obj;
    obj["id"] = rec.id;
    obj["image"] = rel(rec.image);
    obj["agreement"] = rel(rec.agreement);
    obj["instances"] = rel(rec.instances);
    if (rec.count) {
      obj["count"] = *rec.count;
    }
    if (rec.n_observers != kDefaultObservers) {
      obj["n_observers"] = rec.n_observers;
    }
    out << obj.dump() << '\n';
  }
  if (!out) {
    throw IoError("failed writing manifest " + path.string());
  }
}

LabeledImage load_record(const ManifestRecord& record) {
  try {
    return LabeledImage{record.id, read_image(record.image),
                        load_agreement_map(record.agreement, record.n_observers),
                        load_instance_map(record.instances), record.count};
  } catch (const Error& e) {
    throw IoError("record " + record.id + ": " + e.what());
  }
}

}  // namespace relsal::harness
