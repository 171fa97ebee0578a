#pragma once

// Line-oriented sequence file, version "dyadseq-v1":
//
//   dyadseq-v1
//   header visible=<Dv> joints=<J> rate=<Hz> sequences=<N> labels=<name,name,...>
//   meta <key>=<value>                       (zero or more)
//   sequence id=<id> frames=<T> label=<k|->
//   <Dv space-separated values>              (T lines)
//   ...                                      (N sequence blocks)
//   end
//
// Values are written with 17 significant digits so a save/load round trip is
// exact. Blank lines and lines starting with '#' are ignored.

#include <iosfwd>
#include <string>

#include "dcrbm/data.hpp"

namespace dcrbm {

inline constexpr const char* kSequenceFormat = "dyadseq-v1";

void write_sequences(std::ostream& out, const DyadDataset& data);
/// Throws ParseError (with line number) on malformed input; nothing is
/// returned unless the whole file parsed.
DyadDataset read_sequences(std::istream& in);

void save_sequences(const std::string& path, const DyadDataset& data);
DyadDataset load_sequences(const std::string& path);

}  // namespace dcrbm
