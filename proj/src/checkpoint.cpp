#include "advtext/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "advtext/error.hpp"

namespace advtext {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 5> kMagic = {'A', 'D', 'V', 'T', '1'};

struct Header {
  CheckpointKind kind;
  std::uint32_t vocab_rows, embed_dim, hidden_dim, head_dim;
};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw Error(ErrorKind::kInvalidCheckpoint, "truncated header");
  return v;
}

void write_file(const std::filesystem::path& path, const Header& h,
                const std::vector<const Tensor2*>& tensors, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_u32(out, static_cast<std::uint32_t>(h.kind));
  write_u32(out, h.vocab_rows);
  write_u32(out, h.embed_dim);
  write_u32(out, h.hidden_dim);
  write_u32(out, h.head_dim);
  for (const Tensor2* t : tensors) {
    const auto flat = t->flat();
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());

  nlohmann::ordered_json side;
  side["format"] = "ADVT1";
  side["kind"] = h.kind == CheckpointKind::kClassifier ? "classifier" : "lm";
  side["vocab_rows"] = h.vocab_rows;
  side["embed_dim"] = h.embed_dim;
  side["hidden_dim"] = h.hidden_dim;
  if (h.kind == CheckpointKind::kClassifier) side["head_dim"] = h.head_dim;
  side["seed"] = seed;
  std::ofstream js(sidecar_path(path));
  if (!js) throw Error(ErrorKind::kIo, "cannot write sidecar for " + path.string());
  js << side.dump(2) << '\n';
}

Header read_header(std::istream& in, CheckpointKind expected) {
  std::array<char, 5> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(ErrorKind::kInvalidCheckpoint, "bad magic");
  Header h{};
  h.kind = static_cast<CheckpointKind>(read_u32(in));
  h.vocab_rows = read_u32(in);
  h.embed_dim = read_u32(in);
  h.hidden_dim = read_u32(in);
  h.head_dim = read_u32(in);
  if (h.kind != expected) throw Error(ErrorKind::kInvalidCheckpoint, "unexpected checkpoint kind");
  return h;
}

void read_tensors(std::istream& in, const std::vector<Tensor2*>& tensors) {
  for (Tensor2* t : tensors) {
    auto flat = t->flat();
    in.read(reinterpret_cast<char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!in) throw Error(ErrorKind::kInvalidCheckpoint, "truncated tensor data");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::kInvalidCheckpoint, "trailing bytes after tensor data");
  }
}

std::uint32_t u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void save_classifier(const std::filesystem::path& path, const ClassifierParams& params,
                     std::uint64_t seed) {
  const ClassifierDims d = params.dims();
  write_file(path,
             {CheckpointKind::kClassifier, u32(d.vocab_rows), u32(d.embed_dim), u32(d.hidden_dim),
              u32(d.head_dim)},
             params.tensors(), seed);
}

ClassifierParams load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  const Header h = read_header(in, CheckpointKind::kClassifier);
  ClassifierParams p;
  try {
    p = ClassifierParams::zeros({h.vocab_rows, h.embed_dim, h.hidden_dim, h.head_dim});
  } catch (const Error& e) {
    throw Error(ErrorKind::kInvalidCheckpoint, e.what());
  }
  read_tensors(in, p.tensors());
  return p;
}

void save_lm(const std::filesystem::path& path, const LMParams& params, std::uint64_t seed) {
  const LmDims d = params.dims();
  write_file(path,
             {CheckpointKind::kLanguageModel, u32(d.vocab_rows), u32(d.embed_dim),
              u32(d.hidden_dim), 0},
             params.tensors(), seed);
}

LMParams load_lm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  const Header h = read_header(in, CheckpointKind::kLanguageModel);
  LMParams p;
  try {
    p = LMParams::zeros({h.vocab_rows, h.embed_dim, h.hidden_dim});
  } catch (const Error& e) {
    throw Error(ErrorKind::kInvalidCheckpoint, e.what());
  }
  read_tensors(in, p.tensors());
  return p;
}

}  // namespace advtext
