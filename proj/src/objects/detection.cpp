// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/objects/detection.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dynvio {

namespace {

template <typename It>
int argmax(It begin, It end) {
  int best = -1;
  double p = -1.0;
  for (auto it = begin; it != end; ++it) {
    if (it->second > p || (it->second == p && it->first < best)) {
      best = it->first;
      p = it->second;
    }
  }
  return best;
}

}  // namespace

int ClassMapEntry::argmaxClass() const { return argmax(probs.begin(), probs.end()); }

int Detection::classId() const { return argmax(class_probs.begin(), class_probs.end()); }

std::vector<ClassMapEntry> readClassMap(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open class map " + path);
  std::vector<ClassMapEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    std::istringstream ss(line);
    ClassMapEntry e;
    if (!(ss >> e.instance) || e.instance <= 0) throw std::runtime_error(where + "bad instance id");
    std::string tok;
    while (ss >> tok) {
      const auto colon = tok.find(':');
      std::size_t used_c = 0, used_p = 0;
      int c = 0;
      double p = 0.0;
      try {
        if (colon == std::string::npos) throw std::invalid_argument("");
        c = std::stoi(tok.substr(0, colon), &used_c);
        p = std::stod(tok.substr(colon + 1), &used_p);
      } catch (const std::exception&) {
        throw std::runtime_error(where + "bad class entry '" + tok + "'");
      }
      if (used_c != colon || used_p != tok.size() - colon - 1 || p < 0.0 || p > 1.0) {
        throw std::runtime_error(where + "bad class entry '" + tok + "'");
      }
      e.probs.emplace_back(c, p);
    }
    if (e.probs.empty()) throw std::runtime_error(where + "no class probabilities");
    out.push_back(std::move(e));
  }
  return out;
}

void writeClassMap(const std::string& path, const std::vector<ClassMapEntry>& entries) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "# instance class:probability ...\n";
  for (const auto& e : entries) {
    os << e.instance;
    for (const auto& [c, p] : e.probs) os << ' ' << c << ':' << p;
    os << '\n';
  }
  if (!os) throw std::runtime_error("error writing " + path);
}

std::vector<Detection> extractDetections(const ImageU16& labels,
                                         const std::vector<ClassMapEntry>& classes) {
  std::map<int, Detection> by_label;
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const int l = labels(x, y);
      if (l == 0) continue;
      auto [it, fresh] = by_label.try_emplace(l);
      Detection& d = it->second;
      if (fresh) {
        d.label = l;
        d.mask = Mask(labels.width(), labels.height(), 0);
      }
      d.mask(x, y) = 1;
      ++d.size;
      d.centroid += Eigen::Vector2d(x, y);
    }
  }
  std::vector<Detection> out;
  for (auto& [l, d] : by_label) {
    d.centroid /= d.size;
    for (const auto& e : classes) {
      if (e.instance != l) continue;
      for (const auto& [c, p] : e.probs) d.class_probs[c] += p;
    }
    out.push_back(std::move(d));
  }
  return out;
}

double maskIoU(const Mask& a, const Mask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] != 0, pb = b[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Association associate(const std::vector<Detection>& detections, const Image<int>& rendered,
                      const std::vector<int>& model_ids, double threshold) {
  const std::size_t nd = detections.size(), nm = model_ids.size();
  std::map<int, std::size_t> model_index;
  for (std::size_t j = 0; j < nm; ++j) model_index[model_ids[j]] = j;

  std::vector<std::size_t> model_area(nm, 0), det_area(nd, 0);
  std::vector<std::size_t> inter(nd * nm, 0);
  for (std::size_t p = 0; p < rendered.size(); ++p) {
    const auto it = model_index.find(rendered[p]);
    const std::size_t j = it == model_index.end() ? nm : it->second;
    if (j < nm) ++model_area[j];
    for (std::size_t i = 0; i < nd; ++i) {
      if (!detections[i].mask[p]) continue;
      ++det_area[i];
      if (j < nm) ++inter[i * nm + j];
    }
  }

  struct Candidate {
    double iou;
    std::size_t det, model;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < nd; ++i) {
    for (std::size_t j = 0; j < nm; ++j) {
      const std::size_t in = inter[i * nm + j];
      const std::size_t un = det_area[i] + model_area[j] - in;
      if (un == 0) continue;
      const double iou = static_cast<double>(in) / static_cast<double>(un);
      if (iou > threshold) cands.push_back({iou, i, j});
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.iou > b.iou; });

  Association out;
  std::vector<bool> det_used(nd, false), model_used(nm, false);
  for (const auto& c : cands) {
    if (det_used[c.det] || model_used[c.model]) continue;
    det_used[c.det] = model_used[c.model] = true;
    out.matches.emplace_back(static_cast<int>(c.det), model_ids[c.model]);
    out.iou.push_back(c.iou);
  }
  for (std::size_t i = 0; i < nd; ++i)
    if (!det_used[i]) out.unmatched.push_back(static_cast<int>(i));
  return out;
}

}  // namespace dynvio
