#include "orch/metrics.hpp"

#include "orch/errors.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

namespace orch::metrics {

const char* to_string(MetricKind kind) {
    return kind == MetricKind::EmF1 ? "em_f1" : "cosine";
}

MetricKind metric_kind_from_string(std::string_view name) {
    if (name == "em_f1") return MetricKind::EmF1;
    if (name == "cosine") return MetricKind::Cosine;
    throw DatasetError("unknown metric kind: " + std::string(name));
}

int exact_match(std::string_view pred, const reward::ReferenceSet& refs) {
    if (refs.references.empty()) {
        throw std::invalid_argument("exact match needs at least one reference");
    }
    const std::string p = reward::standardize(pred);
    for (const auto& ref : refs.references) {
        if (p == reward::standardize(ref)) return 1;
    }
    return 0;
}

double token_f1(std::string_view pred, const reward::ReferenceSet& refs) {
    return reward::precision_reward(pred, refs);
}

namespace {

double cosine_of_vectors(const std::vector<double>& u, const std::vector<double>& v) {
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 && nv == 0.0) return 1.0;
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

}  // namespace

double cosine_similarity(std::string_view pred, std::string_view ref) {
    const auto a = reward::segment(reward::standardize(pred));
    const auto b = reward::segment(reward::standardize(ref));
    std::set<std::string> vocab;
    for (const auto& [token, _] : a) vocab.insert(token);
    for (const auto& [token, _] : b) vocab.insert(token);
    std::vector<double> u, v;
    u.reserve(vocab.size());
    v.reserve(vocab.size());
    for (const auto& token : vocab) {
        const auto ia = a.find(token);
        const auto ib = b.find(token);
        u.push_back(ia == a.end() ? 0.0 : ia->second);
        v.push_back(ib == b.end() ? 0.0 : ib->second);
    }
    return cosine_of_vectors(u, v);
}

double cosine_similarity(std::string_view pred, std::string_view ref,
                         const Vectorizer& vectorizer) {
    const std::vector<double> u = vectorizer(pred);
    const std::vector<double> v = vectorizer(ref);
    if (u.size() != v.size()) {
        throw std::invalid_argument("vectorizer dimension mismatch: " + std::to_string(u.size()) +
                                    " vs " + std::to_string(v.size()));
    }
    return cosine_of_vectors(u, v);
}

double to_percent(double mean_fraction) {
    return std::floor(mean_fraction * 10000.0 + 0.5) / 100.0;
}

std::string format_percent(double percent) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", percent);
    return buf;
}

std::string render_report_csv(const std::vector<DatasetReportRow>& rows) {
    std::string csv = "dataset,n,em_percent,f1_percent,cosine_percent\n";
    for (const auto& row : rows) {
        csv += row.dataset + "," + std::to_string(row.n) + ",";
        csv += row.em_percent ? format_percent(*row.em_percent) : "";
        csv += ",";
        csv += row.f1_percent ? format_percent(*row.f1_percent) : "";
        csv += ",";
        csv += row.cosine_percent ? format_percent(*row.cosine_percent) : "";
        csv += "\n";
    }
    return csv;
}

}  // namespace orch::metrics

