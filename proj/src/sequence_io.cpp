#include "dcrbm/sequence_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dcrbm/checkpoint.hpp"
#include "dcrbm/error.hpp"

namespace dcrbm {
namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

std::map<std::string, std::string> parse_fields(const std::string& rest, std::size_t line) {
  std::map<std::string, std::string> fields;
  std::istringstream is(rest);
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value, got '" + token + "'", line);
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return fields;
}

const std::string& field(const std::map<std::string, std::string>& f, const std::string& key,
                         std::size_t line) {
  const auto it = f.find(key);
  if (it == f.end()) throw ParseError("missing field '" + key + "'", line);
  return it->second;
}

Index parse_index(const std::string& s, std::size_t line) {
  Index v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("expected an integer, got '" + s + "'", line);
  }
  return v;
}

double parse_double(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ParseError("expected a number, got '" + s + "'", line);
  }
  return v;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  /// Next non-blank, non-comment line; false at end of input.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  }

  std::string require(const char* what) {
    std::string line;
    if (!next(line)) throw ParseError(std::string("unexpected end of file, expected ") + what, number_ + 1);
    return line;
  }

  std::size_t number() const { return number_; }

 private:
  std::istream& in_;
  std::size_t number_ = 0;
};

}  // namespace

void write_sequences(std::ostream& out, const DyadDataset& data) {
  data.validate();
  out << kSequenceFormat << "\n";
  out << "header visible=" << data.visible << " joints=" << data.joints
      << " rate=" << format_double(data.frame_rate) << " sequences=" << data.sequences.size()
      << " labels=";
  for (std::size_t k = 0; k < data.label_names.size(); ++k) {
    out << (k ? "," : "") << data.label_names[k];
  }
  out << "\n";
  for (const auto& [key, value] : data.metadata) {
    if (key.find_first_of(" \t=\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw DataError("metadata entry '" + key + "' cannot be written on one line");
    }
    out << "meta " << key << "=" << value << "\n";
  }
  for (const auto& seq : data.sequences) {
    if (seq.id.empty() || seq.id.find_first_of(" \t\n") != std::string::npos) {
      throw DataError("sequence ids must be non-empty and contain no whitespace");
    }
    out << "sequence id=" << seq.id << " frames=" << seq.length()
        << " label=" << (seq.label ? std::to_string(*seq.label) : std::string("-")) << "\n";
    for (Index t = 0; t < seq.length(); ++t) {
      for (Index d = 0; d < seq.frames.cols(); ++d) {
        out << (d ? " " : "") << format_double(seq.frames(t, d));
      }
      out << "\n";
    }
  }
  out << "end\n";
}

DyadDataset read_sequences(std::istream& in) {
  LineReader reader(in);
  std::string line = reader.require("format tag");
  if (line != kSequenceFormat) {
    throw ParseError("not a " + std::string(kSequenceFormat) + " file", reader.number());
  }
  line = reader.require("header");
  if (line.rfind("header ", 0) != 0) throw ParseError("expected header record", reader.number());
  const auto header = parse_fields(line.substr(7), reader.number());
  DyadDataset data;
  data.visible = parse_index(field(header, "visible", reader.number()), reader.number());
  data.joints = parse_index(field(header, "joints", reader.number()), reader.number());
  data.frame_rate = parse_double(field(header, "rate", reader.number()), reader.number());
  const Index count = parse_index(field(header, "sequences", reader.number()), reader.number());
  const auto labels_it = header.find("labels");
  if (labels_it != header.end() && !labels_it->second.empty()) {
    data.label_names = split(labels_it->second, ',');
  }
  if (data.visible < 1) throw ParseError("visible dimension must be >= 1", reader.number());

  line = reader.require("sequence or meta record");
  while (line.rfind("meta ", 0) == 0) {
    const auto rest = line.substr(5);
    const auto eq = rest.find('=');
    if (eq == std::string::npos) throw ParseError("meta record needs key=value", reader.number());
    data.metadata[rest.substr(0, eq)] = rest.substr(eq + 1);
    line = reader.require("sequence record");
  }
  for (Index s = 0; s < count; ++s) {
    if (s > 0) line = reader.require("sequence record");
    if (line.rfind("sequence ", 0) != 0) throw ParseError("expected sequence record", reader.number());
    const std::size_t record_line = reader.number();
    const auto f = parse_fields(line.substr(9), record_line);
    DyadSequence seq;
    seq.id = field(f, "id", record_line);
    const Index frames = parse_index(field(f, "frames", record_line), record_line);
    const std::string& label = field(f, "label", record_line);
    if (label != "-") seq.label = parse_index(label, record_line);
    seq.frames.resize(frames, data.visible);
    for (Index t = 0; t < frames; ++t) {
      line = reader.require("frame values");
      std::istringstream is(line);
      std::string tok;
      Index d = 0;
      while (is >> tok) {
        if (d >= data.visible) {
          throw ParseError("sequence '" + seq.id + "' frame " + std::to_string(t) +
                               ": more than " + std::to_string(data.visible) + " values",
                           reader.number());
        }
        seq.frames(t, d++) = parse_double(tok, reader.number());
      }
      if (d != data.visible) {
        throw ParseError("sequence '" + seq.id + "' frame " + std::to_string(t) + ": expected " +
                             std::to_string(data.visible) + " values, got " + std::to_string(d),
                         reader.number());
      }
    }
    data.sequences.push_back(std::move(seq));
    line.clear();
  }
  line = reader.require("end marker");
  if (line != "end") throw ParseError("expected end marker", reader.number());
  try {
    data.validate();
  } catch (const DataError& e) {
    throw ParseError(e.what(), reader.number());
  }
  return data;
}

void save_sequences(const std::string& path, const DyadDataset& data) {
  std::ostringstream os;
  write_sequences(os, data);
  write_file_atomic(path, os.str());
}

DyadDataset load_sequences(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open sequence file '" + path + "'");
  return read_sequences(in);
}

}  // namespace dcrbm
