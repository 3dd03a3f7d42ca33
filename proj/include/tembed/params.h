#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace tembed {

struct Tensor {
  std::string name;
  Eigen::MatrixXd value;
};

// Ordered collection of named tensors. Gradients use the same type with the
// same layout as the parameters they belong to.
class ParamSet {
 public:
  Eigen::MatrixXd& add(std::string name, Eigen::Index rows, Eigen::Index cols);

  Eigen::MatrixXd& operator[](std::string_view name);
  const Eigen::MatrixXd& operator[](std::string_view name) const;
  bool contains(std::string_view name) const;

  size_t size() const { return tensors_.size(); }
  Tensor& at(size_t i) { return tensors_.at(i); }
  const Tensor& at(size_t i) const { return tensors_.at(i); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }

  // Sum of tensor sizes.
  long long total_size() const;
  ParamSet zeros_like() const;
  bool same_layout(const ParamSet& other) const;
  bool all_finite() const;

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<Tensor> tensors_;
};

// Binary container:
//   "TEMBPSET" | u32 version=1 | u32 count
//   count x { u32 name_len | name | u32 rows | u32 cols }   (shape manifest)
//   count x { rows*cols little-endian f64, column-major }
std::string serialize(const ParamSet& params);
ParamSet deserialize(std::string_view bytes);

void save_params(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_params(const std::filesystem::path& path);

}  // namespace tembed
