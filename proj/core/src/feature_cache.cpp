#include "cmls/feature_cache.hpp"

#include <atomic>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <unistd.h>

#include "cmls/errors.hpp"

namespace cmls {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'C', 'M', 'L', 'S', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
bool get(std::ifstream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

std::atomic<unsigned> g_tmp_counter{0};

}  // namespace

FeatureCache::FeatureCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path FeatureCache::path_for(const std::string& utterance_id, std::uint64_t config_hash) const {
  return dir_ / (hex64(fnv1a(utterance_id)) + "-" + hex64(config_hash) + ".feat");
}

std::optional<FeatureSequence> FeatureCache::load(const std::string& utterance_id, std::uint64_t config_hash) const {
  return read_feature_record(path_for(utterance_id, config_hash), utterance_id, config_hash);
}

void FeatureCache::store(const FeatureSequence& seq, std::uint64_t config_hash) const {
  write_feature_record(path_for(seq.utterance_id, config_hash), seq, config_hash);
}

void write_feature_record(const fs::path& path, const FeatureSequence& seq, std::uint64_t config_hash) {
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(g_tmp_counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write feature cache file " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    put(out, kVersion);
    put(out, config_hash);
    put(out, static_cast<std::uint32_t>(seq.utterance_id.size()));
    out.write(seq.utterance_id.data(), static_cast<std::streamsize>(seq.utterance_id.size()));
    put(out, static_cast<std::uint32_t>(seq.frames.rows()));
    put(out, static_cast<std::uint32_t>(seq.frames.cols()));
    out.write(reinterpret_cast<const char*>(seq.frames.data()),
              static_cast<std::streamsize>(seq.frames.size() * sizeof(Real)));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

std::optional<FeatureSequence> read_feature_record(const fs::path& path, const std::string& expected_id,
                                                   std::uint64_t expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  std::uint32_t version = 0, id_len = 0, rows = 0, cols = 0;
  std::uint64_t hash = 0;
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw ParseError(path.string() + ": not a feature cache record");
  if (!get(in, version) || version != kVersion) throw ParseError(path.string() + ": unsupported feature cache version");
  if (!get(in, hash) || !get(in, id_len)) throw ParseError(path.string() + ": truncated header");
  std::string id(id_len, '\0');
  if (!in.read(id.data(), id_len)) throw ParseError(path.string() + ": truncated id");
  if (hash != expected_hash || id != expected_id) return std::nullopt;
  if (!get(in, rows) || !get(in, cols)) throw ParseError(path.string() + ": truncated shape");
  FeatureSequence seq;
  seq.utterance_id = std::move(id);
  seq.frames.resize(rows, cols);
  if (!in.read(reinterpret_cast<char*>(seq.frames.data()), static_cast<std::streamsize>(seq.frames.size() * sizeof(Real))))
    throw ParseError(path.string() + ": truncated payload");
  return seq;
}

std::vector<FeatureSequence> extract_features(const std::vector<UtteranceRecord>& records, const FeatureConfig& cfg,
                                              const FeatureCache* cache, int num_workers) {
  const MfccExtractor extractor(cfg);
  const std::uint64_t h = cfg.hash();
  std::vector<FeatureSequence> out(records.size());

  auto one = [&](std::size_t i) {
    const auto& rec = records[i];
    if (cache) {
      if (auto hit = cache->load(rec.id, h)) {
        out[i] = std::move(*hit);
        return;
      }
    }
    try {
      out[i] = extractor(read_wav(rec.audio_path), rec.id);
    } catch (const Error& e) {
      throw ValidationError("utterance '" + rec.id + "': " + e.what());
    }
    if (cache) cache->store(out[i], h);
  };

  const int workers = std::max(1, std::min<int>(num_workers, static_cast<int>(records.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < records.size(); ++i) one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < records.size(); i = next++) {
        try {
          one(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = records.size();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace cmls
