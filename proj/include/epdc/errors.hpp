// ============================================================================
// errors.hpp -- exception hierarchy shared across the toolkit
//
// Every failure mode maps to one of these types so the CLI can translate
// them into stable exit codes (see tools/epdc_main.cpp).
// ============================================================================
#pragma once
#include <stdexcept>
#include <string>

namespace epdc {

/// Invalid domain object (model, distribution, dataset) or argument.
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// Too few data points / empty input for the requested operation.
class arity_error : public validation_error {
 public:
  explicit arity_error(const std::string& what) : validation_error(what) {}
};

/// Malformed input file; message carries the line number where known.
class parse_error : public std::runtime_error {
 public:
  explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

/// Missing or contradictory unit declarations in a file header.
class unit_error : public parse_error {
 public:
  explicit unit_error(const std::string& what) : parse_error(what) {}
};

/// Unwritable path or other filesystem failure.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Parameters (or a subset) cannot be determined from the data.
class identifiability_error : public std::runtime_error {
 public:
  explicit identifiability_error(const std::string& what) : std::runtime_error(what) {}
};

/// Requested truncation leaves too much probability mass unaccounted for.
class tail_mass_error : public std::runtime_error {
 public:
  explicit tail_mass_error(const std::string& what) : std::runtime_error(what) {}
};

/// The requested pair of photon orders never exchanges dominance (a click
/// probability in the pair is zero).
class crossover_error : public validation_error {
 public:
  explicit crossover_error(const std::string& what) : validation_error(what) {}
};

}  // namespace epdc
