#pragma once

// JSON configuration files. Keys mirror ExperimentConfig:
//
//   family, schedule, d, spectrum [{sigma, weight}], rotation_seed,
//   entry_law {kind, tail_index}, trials, repetition_cap, seed, output, tau,
//   solver {tol, max_iter, eta_floor}, signal {k, amplitude_lo, amplitude_hi},
//   separable {a, layout, block}, spiked {edge_offset, half_window, averaging},
//   locallaw {E, eta, q, omega}
//
// Every key is optional. Unknown keys and invalid values are reported
// together in a single ConfigError.

#include "mpvesd/experiments.hpp"

#include <cstdint>
#include <string>

namespace mpvesd {

/// Parses and validates a JSON document. Throws ConfigError.
ExperimentConfig parse_config(const std::string& text);
/// Reads `path` and parses it. Throws ConfigError.
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON with every field written out.
std::string dump_config(const ExperimentConfig& cfg);
void save_config(const ExperimentConfig& cfg, const std::string& path);

/// FNV-1a hash of dump_config(cfg).
std::uint64_t config_hash(const ExperimentConfig& cfg);

const char* entry_kind_name(EntryKind kind);
/// Throws ConfigError.
EntryKind parse_entry_kind(const std::string& name);

} // namespace mpvesd
