#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "corast/nn/parameters.hpp"

namespace corast::nn {

// Checkpoint layout (version 1):
//
//   CORAST-CHECKPOINT 1\n
//   meta <key>=<value>\n            zero or more, values are single-line
//   param <name> <rank> <d0> ...\n  one line per parameter, in set order
//   data\n
//   <row-major little-endian float64 values of every parameter, same order>

struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Tensor>> params;
};

void write_checkpoint(std::ostream& out, const ParameterSet& params, const std::map<std::string, std::string>& meta);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const std::map<std::string, std::string>& meta);
Checkpoint load_checkpoint(const std::string& path);

/// Copy checkpoint values into `params`; names and shapes must match exactly.
void apply_checkpoint(const Checkpoint& ckpt, ParameterSet& params);

}  // namespace corast::nn
