#include "normkit/candidates.hpp"

#include "normkit/errors.hpp"
#include "normkit/io_util.hpp"

#include <nlohmann/json.hpp>

#include <unordered_set>

namespace normkit {

using nlohmann::json;

void check_candidate_list(const CandidateList& list) {
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i].rank != i + 1) {
      throw InvalidInput("candidate " + list[i].cui + " has rank " +
                         std::to_string(list[i].rank) + ", expected " + std::to_string(i + 1));
    }
    if (!seen.insert(list[i].cui).second) {
      throw InvalidInput("CUI " + list[i].cui + " appears twice in a candidate list");
    }
  }
}

std::string serialize_prediction(const Prediction& p) {
  json candidates = json::array();
  for (const auto& c : p.candidates) {
    candidates.push_back({{"cui", c.cui}, {"name", c.name}, {"score", c.score}, {"rank", c.rank}});
  }
  return json{{"mention_id", p.mention_id}, {"candidates", std::move(candidates)}}.dump();
}

Prediction parse_prediction(std::string_view json_line) {
  const json j = json::parse(json_line);
  Prediction p;
  p.mention_id = j.at("mention_id").get<std::string>();
  for (const auto& jc : j.at("candidates")) {
    p.candidates.push_back({jc.at("cui").get<std::string>(), jc.value("name", std::string()),
                            jc.at("score").get<double>(), jc.at("rank").get<std::size_t>()});
  }
  check_candidate_list(p.candidates);
  return p;
}

void save_predictions(const std::vector<Prediction>& predictions, const std::string& path) {
  std::string out;
  for (const auto& p : predictions) {
    out += serialize_prediction(p);
    out += '\n';
  }
  io::write_atomic(path, out);
}

std::vector<Prediction> load_predictions(const std::string& path) {
  std::vector<Prediction> out;
  io::for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    try {
      out.push_back(parse_prediction(line));
    } catch (const json::exception& e) {
      throw LoadError(path, line_no, e.what());
    } catch (const InvalidInput& e) {
      throw LoadError(path, line_no, e.what());
    }
  });
  return out;
}

}  // namespace normkit
