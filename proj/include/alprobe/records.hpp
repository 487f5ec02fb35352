#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "alprobe/probe.hpp"

namespace alprobe {

// Probe record stream: per sentence, the original and perturbed
// ProbedSentence objects followed by its PerturbationRecord object.
void write_probe_records(std::ostream& out, const std::vector<ProbeResult>& results);
void write_probe_records(const std::filesystem::path& path, const std::vector<ProbeResult>& results);

struct RecordStream {
  std::vector<ProbedSentence> sentences;
  std::vector<PerturbationRecord> perturbations;
};

RecordStream read_probe_records(std::istream& in);
RecordStream read_probe_records(const std::filesystem::path& path);

}  // namespace alprobe
