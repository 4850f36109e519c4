#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "towerfleet/stl/formula.hpp"

namespace towerfleet::stl {

// S-expression dump used in logs and test fixtures (grammar in docs/formula_grammar.md):
//   (and ["label"] f ...)   (or ["label"] f ...)
//   (G ["label"] lo hi f)   (F ["label"] lo hi f)
//   (mu ["label"] ((index coeff) ...) offset)

class FormulaSyntaxError : public std::runtime_error {
 public:
  FormulaSyntaxError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

std::string to_text(const Formula& f);
Formula parse_formula(std::string_view text);

}  // namespace towerfleet::stl
