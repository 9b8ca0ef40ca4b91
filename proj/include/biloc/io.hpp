#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "biloc/config.hpp"
#include "biloc/event_sim.hpp"

// On-disk formats: CSV detection streams (node, detector, setting, tick,
// block_index), CSV reference edges and the JSON run manifest.
namespace biloc {

inline const char* node_name(Node n) {
  switch (n) {
    case Node::A: return "A";
    case Node::B_armA: return "B_armA";
    case Node::B_armC: return "B_armC";
    default: return "C";
  }
}

inline void write_stream_csv(const std::string& path,
                             const std::vector<DetectionRecord>& stream) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "node,detector,setting,tick,block_index\n";
  for (const DetectionRecord& r : stream)
    out << static_cast<int>(r.node) << ',' << static_cast<int>(r.detector)
        << ',' << static_cast<int>(r.setting) << ',' << r.tick << ','
        << r.block << '\n';
}

inline std::vector<DetectionRecord> read_stream_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<DetectionRecord> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    DetectionRecord r;
    int node, det, set;
    long long tick;
    unsigned long block;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%lld,%lu", &node, &det, &set,
                    &tick, &block) != 5)
      throw std::runtime_error("malformed stream record in " + path + ": " +
                               line);
    r.node = static_cast<Node>(node);
    r.detector = static_cast<std::uint8_t>(det);
    r.setting = static_cast<std::uint8_t>(set);
    r.tick = tick;
    r.block = static_cast<std::uint32_t>(block);
    out.push_back(r);
  }
  return out;
}

inline void write_reference_csv(const std::string& path,
                                const ReferenceSignal& ref) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "kind,edge_tick\n";
  const char* kind =
      ref.kind == ReferenceSignal::Kind::square_10kHz ? "square_10kHz"
                                                      : "pulse_1Hz";
  for (std::int64_t e : ref.edges) out << kind << ',' << e << '\n';
}

inline ReferenceSignal read_reference_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  ReferenceSignal ref;
  std::string line;
  std::getline(in, line);
  bool kind_set = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("malformed reference record in " + path);
    if (!kind_set) {
      ref.kind = line.substr(0, comma) == "pulse_1Hz"
                     ? ReferenceSignal::Kind::pulse_1Hz
                     : ReferenceSignal::Kind::square_10kHz;
      kind_set = true;
    }
    ref.edges.push_back(std::stoll(line.substr(comma + 1)));
  }
  return ref;
}

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  double duration_s = 0;
  std::vector<std::pair<std::string, std::size_t>> files;  // name, records
};

inline void write_manifest(const std::string& path, const RunManifest& m) {
  nlohmann::json j;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["duration_s"] = m.duration_s;
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [name, n] : m.files) files[name] = n;
  j["files"] = files;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

// Writes streams, references, a config copy and the manifest into out_dir.
inline RunManifest write_run(const std::filesystem::path& out_dir,
                             const ExperimentConfig& cfg,
                             const RunOutput& run) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  RunManifest m;
  m.config_hash = config_hash(cfg);
  m.seed = cfg.seed;
  m.duration_s = cfg.duration_s;
  for (int i = 0; i < 4; ++i) {
    std::string name = std::string("stream_") +
                       node_name(static_cast<Node>(i)) + ".csv";
    write_stream_csv((out_dir / name).string(), run.streams[i]);
    m.files.emplace_back(name, run.streams[i].size());
  }
  const std::pair<const char*, const ReferenceSignal*> refs[] = {
      {"ref10k_marconi.csv", &run.ref10k_marconi},
      {"pulse1_marconi.csv", &run.pulse1_marconi},
      {"ref10k_fermi.csv", &run.ref10k_fermi},
      {"pulse1_fermi.csv", &run.pulse1_fermi}};
  for (const auto& [name, ref] : refs) {
    write_reference_csv((out_dir / name).string(), *ref);
    m.files.emplace_back(name, ref->edges.size());
  }
  {
    std::ofstream out(out_dir / "config.json");
    out << dump_config(cfg).dump(2) << '\n';
  }
  write_manifest((out_dir / "manifest.json").string(), m);
  return m;
}

struct RunData {
  ExperimentConfig config;
  std::array<std::vector<DetectionRecord>, 4> streams;
  ReferenceSignal ref10k_marconi, pulse1_marconi;
  ReferenceSignal ref10k_fermi, pulse1_fermi;
};

inline RunData read_run(const std::filesystem::path& in_dir) {
  namespace fs = std::filesystem;
  RunData d;
  d.config = load_config((in_dir / "config.json").string());
  for (int i = 0; i < 4; ++i)
    d.streams[i] = read_stream_csv(
        (in_dir / (std::string("stream_") + node_name(static_cast<Node>(i)) +
                   ".csv"))
            .string());
  d.ref10k_marconi =
      read_reference_csv((in_dir / "ref10k_marconi.csv").string());
  d.pulse1_marconi =
      read_reference_csv((in_dir / "pulse1_marconi.csv").string());
  d.ref10k_fermi = read_reference_csv((in_dir / "ref10k_fermi.csv").string());
  d.pulse1_fermi = read_reference_csv((in_dir / "pulse1_fermi.csv").string());
  return d;
}

}  // namespace biloc
