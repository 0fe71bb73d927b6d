#pragma once

#include <string>
#include <string_view>

#include "cxdiag/mdp.hpp"

namespace cxdiag {

/// Reads the line-oriented explicit format:
///
///   STATES <n>
///   INIT <s>
///   <s> <action> <s'> <prob>     (one line per transition)
///
/// and the optional labels file (`<s>: <ap> <ap> ...`). `#` starts a comment.
/// Throws ParseError with the offending line.
Mdp read_explicit_model(std::string_view transitions, std::string_view labels = {});

std::string write_transitions(const Mdp& m);
std::string write_labels(const Mdp& m);

/// Structural equality by names (action labels and APs), independent of interning order.
bool equivalent(const Mdp& a, const Mdp& b);

}  // namespace cxdiag
