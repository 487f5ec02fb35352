#include "alprobe/records.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "alprobe/error.hpp"

namespace alprobe {

using json = nlohmann::json;

namespace {

json sentence_json(const ProbedSentence& s) {
  json layers = json::array();
  for (const auto& l : s.layers) {
    layers.push_back({{"layer", l.layer},
                      {"tok_attn", l.token_attention},
                      {"sent_attn", l.sentence_attention},
                      {"mat_mean", l.matrix_mean}});
  }
  return {{"id", s.id}, {"variant", to_string(s.variant)}, {"likelihood", s.likelihood},
          {"layers", std::move(layers)}};
}

json perturbation_json(const PerturbationRecord& r) {
  return {{"id", r.sentence_id},
          {"span", {r.span.begin, r.span.end}},
          {"original_ids", r.original_ids},
          {"replacement_ids", r.replacement_ids},
          {"l_orig", r.l_orig},
          {"l_pert", r.l_pert},
          {"strategy", r.strategy.to_string()},
          {"seed", r.strategy.seed},
          {"degenerate", r.degenerate}};
}

}  // namespace

void write_probe_records(std::ostream& out, const std::vector<ProbeResult>& results) {
  for (const auto& r : results) {
    out << sentence_json(r.original).dump() << '\n';
    out << sentence_json(r.perturbed).dump() << '\n';
    out << perturbation_json(r.perturbation).dump() << '\n';
  }
}

void write_probe_records(const std::filesystem::path& path, const std::vector<ProbeResult>& results) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_probe_records(out, results);
  if (!out) throw IoError("failed writing " + path.string());
}

RecordStream read_probe_records(std::istream& in) {
  RecordStream stream;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (j.contains("variant")) {
        ProbedSentence s;
        s.id = j.at("id").get<std::string>();
        s.variant = parse_variant(j.at("variant").get<std::string>());
        s.likelihood = j.at("likelihood").get<double>();
        for (const auto& lj : j.at("layers")) {
          LayerSummary l;
          l.layer = lj.at("layer").get<std::size_t>();
          l.token_attention = lj.at("tok_attn").get<double>();
          l.sentence_attention = lj.at("sent_attn").get<std::vector<double>>();
          l.matrix_mean = lj.at("mat_mean").get<double>();
          s.layers.push_back(std::move(l));
        }
        stream.sentences.push_back(std::move(s));
      } else {
        PerturbationRecord r;
        r.sentence_id = j.at("id").get<std::string>();
        const auto span = j.at("span").get<std::vector<std::size_t>>();
        if (span.size() != 2) throw FormatError("span must have two entries");
        r.span = {span[0], span[1]};
        r.original_ids = j.at("original_ids").get<std::vector<TokenId>>();
        r.replacement_ids = j.at("replacement_ids").get<std::vector<TokenId>>();
        r.l_orig = j.at("l_orig").get<double>();
        r.l_pert = j.at("l_pert").get<double>();
        r.strategy = PerturbationStrategy::parse(j.at("strategy").get<std::string>(),
                                                 j.value("seed", std::uint64_t{0}));
        r.degenerate = j.at("degenerate").get<bool>();
        stream.perturbations.push_back(std::move(r));
      }
    } catch (const json::exception& e) {
      throw FormatError("records line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw FormatError("records line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return stream;
}

RecordStream read_probe_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open records " + path.string());
  return read_probe_records(in);
}

}  // namespace alprobe
