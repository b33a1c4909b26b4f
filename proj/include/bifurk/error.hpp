/*
   Copyright 2026 The bifurk Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bifurk {

enum class Errc {
  root_has_no_mother,
  overflow,
  invalid_parameter,
  invalid_distribution,
  empty_selection,
  incomplete_tree,
  insufficient_data,
  degenerate_design,
  zero_variance,
  degenerate_variance,
  unstable_fit,
  domain_error,
  parse_error,
  duplicate_id,
  non_positive_id,
  non_finite_value,
  io_error,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::root_has_no_mother: return "RootHasNoMother";
    case Errc::overflow: return "Overflow";
    case Errc::invalid_parameter: return "InvalidParameter";
    case Errc::invalid_distribution: return "InvalidDistribution";
    case Errc::empty_selection: return "EmptySelection";
    case Errc::incomplete_tree: return "IncompleteTree";
    case Errc::insufficient_data: return "InsufficientData";
    case Errc::degenerate_design: return "DegenerateDesign";
    case Errc::zero_variance: return "ZeroVariance";
    case Errc::degenerate_variance: return "DegenerateVariance";
    case Errc::unstable_fit: return "UnstableFit";
    case Errc::domain_error: return "DomainError";
    case Errc::parse_error: return "ParseError";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::non_positive_id: return "NonPositiveId";
    case Errc::non_finite_value: return "NonFiniteValue";
    case Errc::io_error: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace bifurk
