#pragma once

#include <stdexcept>
#include <string>

namespace qvar {

// Every failure raised by the library derives from qvar::error so callers
// (the CLI in particular) can map categories onto exit codes.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter outside its admissible range (e.g. H ∉ (0,1), H·K ∉ (0,1)).
class config_error : public error {
 public:
  using error::error;
};

/// A time or index outside the region where an object is defined.
class domain_error : public error {
 public:
  using error::error;
};

/// Caller misuse: mismatched lengths, too few levels, bad stencil size.
class usage_error : public error {
 public:
  using error::error;
};

/// Input data violating a structural invariant (asymmetry, non-finite values, unsorted times).
class data_error : public error {
 public:
  using error::error;
};

/// Zero variance where a normalization or ratio needs a positive one.
class degenerate_error : public error {
 public:
  using error::error;
};

/// Request beyond what a brute-force routine is willing to enumerate.
class capacity_error : public error {
 public:
  using error::error;
};

/// Matrix with an eigenvalue below the PSD clip threshold.
class not_psd_error : public error {
 public:
  not_psd_error(const std::string& what, double offending)
      : error(what), offending_(offending) {}

  double offending_eigenvalue() const noexcept { return offending_; }

 private:
  double offending_;
};

}  // namespace qvar
