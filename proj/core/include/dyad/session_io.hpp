#pragma once

#include <filesystem>
#include <vector>

#include "dyad/session.hpp"

namespace dyad {

// Aligned-session container: "<id>.dys" binary payload plus "<id>.json"
// sidecar carrying the column map and normalization stats.
//
// Binary layout (little-endian):
//   magic "DYSN" | u32 version | u32 id_len | id bytes
//   u64 T | u32 emitter_dim | u32 receiver_dim
//   f64 emitter[T*De] | f64 receiver[T*Dr] | f64 labels[T*2]
//   u64 fnv1a checksum of everything before it

std::filesystem::path write_session(const SessionBundle& bundle,
                                    const std::filesystem::path& out_dir);
SessionBundle read_session(const std::filesystem::path& bin_path);

// All *.dys files in a directory, sorted by filename.
std::vector<SessionBundle> load_sessions(const std::filesystem::path& dir);

// Raw CSV ingestion: a session directory holds one
// "<source>_<modality>.csv" per stream (header row = channel names) and a
// "labels.csv" with columns competence,warmth.
SessionBundle ingest_session_dir(const std::filesystem::path& session_dir);

std::uint64_t fnv1a(const unsigned char* data, size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace dyad
