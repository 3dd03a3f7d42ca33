#include "tembed/params.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>

#include "tembed/errors.h"
#include "tembed/io.h"

namespace tembed {

Eigen::MatrixXd& ParamSet::add(std::string name, Eigen::Index rows,
                               Eigen::Index cols) {
  if (contains(name)) throw ConfigError("duplicate tensor name " + name);
  tensors_.push_back({std::move(name), Eigen::MatrixXd::Zero(rows, cols)});
  return tensors_.back().value;
}

Eigen::MatrixXd& ParamSet::operator[](std::string_view name) {
  for (auto& t : tensors_) {
    if (t.name == name) return t.value;
  }
  throw ConfigError("no tensor named " + std::string(name));
}

const Eigen::MatrixXd& ParamSet::operator[](std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t.value;
  }
  throw ConfigError("no tensor named " + std::string(name));
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(tensors_.begin(), tensors_.end(),
                     [&](const Tensor& t) { return t.name == name; });
}

long long ParamSet::total_size() const {
  long long n = 0;
  for (const auto& t : tensors_) n += t.value.size();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& t : tensors_) out.add(t.name, t.value.rows(), t.value.cols());
  return out;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (size() != other.size()) return false;
  for (size_t i = 0; i < size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() ||
        a.value.cols() != b.value.cols()) {
      return false;
    }
  }
  return true;
}

bool ParamSet::all_finite() const {
  return std::all_of(tensors_.begin(), tensors_.end(),
                     [](const Tensor& t) { return t.value.allFinite(); });
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (!a.same_layout(b)) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.tensors_[i].value;
    const auto& y = b.tensors_[i].value;
    if (std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) != 0) {
      return false;
    }
  }
  return true;
}

namespace {

constexpr char kMagic[8] = {'T', 'E', 'M', 'B', 'P', 'S', 'E', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bits.begin(), bits.end());
    out.append(reinterpret_cast<const char*>(bits.data()), sizeof(T));
  } else {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::array<unsigned char, sizeof(T)> bits;
    std::memcpy(bits.data(), bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(bits.begin(), bits.end());
    }
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  std::string_view take(size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const {
    if (bytes_.size() - pos_ < n) throw InputError("truncated parameter file");
  }
  std::string_view bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::string serialize(const ParamSet& params) {
  std::string out(kMagic, sizeof(kMagic));
  put<uint32_t>(out, kVersion);
  put<uint32_t>(out, static_cast<uint32_t>(params.size()));
  for (const auto& t : params) {
    put<uint32_t>(out, static_cast<uint32_t>(t.name.size()));
    out += t.name;
    put<uint32_t>(out, static_cast<uint32_t>(t.value.rows()));
    put<uint32_t>(out, static_cast<uint32_t>(t.value.cols()));
  }
  for (const auto& t : params) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      put<double>(out, t.value.data()[i]);
    }
  }
  return out;
}

ParamSet deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw InputError("not a parameter file (bad magic)");
  }
  const auto version = r.get<uint32_t>();
  if (version != kVersion) {
    throw InputError("unsupported parameter file version " +
                     std::to_string(version));
  }
  const auto count = r.get<uint32_t>();
  ParamSet out;
  for (uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<uint32_t>();
    std::string name(r.take(len));
    const auto rows = r.get<uint32_t>();
    const auto cols = r.get<uint32_t>();
    out.add(std::move(name), rows, cols);
  }
  for (auto& t : out) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      t.value.data()[i] = r.get<double>();
    }
  }
  if (!r.done()) throw InputError("trailing bytes in parameter file");
  return out;
}

void save_params(const std::filesystem::path& path, const ParamSet& params) {
  atomic_write(path, serialize(params));
}

ParamSet load_params(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

}  // namespace tembed
