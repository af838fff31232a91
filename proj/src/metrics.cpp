#include "hailgauge/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "hailgauge/csv.hpp"

namespace hailgauge {

std::string_view to_string(ScoringPolicy p) {
    return p == ScoringPolicy::paper_zero ? "paper_zero" : "exclude_misses";
}

std::optional<ScoringPolicy> parse_scoring_policy(std::string_view token) {
    if (token == "paper_zero")
        return ScoringPolicy::paper_zero;
    if (token == "exclude_misses")
        return ScoringPolicy::exclude_misses;
    return std::nullopt;
}

std::string_view to_string(ValueSource v) {
    return v == ValueSource::rounded ? "rounded" : "raw";
}

std::optional<ValueSource> parse_value_source(std::string_view token) {
    if (token == "rounded")
        return ValueSource::rounded;
    if (token == "raw")
        return ValueSource::raw;
    return std::nullopt;
}

std::string_view to_string(StratifyKey k) {
    switch (k) {
    case StratifyKey::reference_manual: return "reference_manual";
    case StratifyKey::reference_model_step1: return "reference_model_step1";
    case StratifyKey::distance: return "distance";
    }
    return "reference_manual";
}

ErrorSet signed_errors(std::span<const Measurement> measurements, const TruthMap& truths, ScoringPolicy policy,
                       ValueSource source) {
    ErrorSet out;
    for (const auto& m : measurements) {
        auto it = truths.find(m.sample_id);
        if (it == truths.end())
            throw Error("no ground truth for sample '" + m.sample_id + "'");
        if (m.miss && m.miss_reason == MissReason::provider_failure) {
            ++out.excluded_count;
            continue;
        }
        ++out.evaluated;
        double pred = 0.0;
        if (m.miss) {
            ++out.miss_count;
            if (policy == ScoringPolicy::exclude_misses)
                continue;
        } else {
            pred = source == ValueSource::rounded ? *m.value_cm_rounded : *m.value_cm_raw;
        }
        out.pairs.push_back({m.sample_id, pred, it->second, pred - it->second});
    }
    return out;
}

namespace {

// Welford-style running moments for the two series and their co-moment.
class PairAccumulator {
public:
    void add(double pred, double truth) {
        ++n_;
        double e = pred - truth;
        abs_sum_ += std::abs(e);
        sum_ += e;
        sq_sum_ += e * e;

        double dp = pred - mean_p_;
        double dt = truth - mean_t_;
        double k = static_cast<double>(n_);
        mean_p_ += dp / k;
        mean_t_ += dt / k;
        m2_p_ += dp * (pred - mean_p_);
        m2_t_ += dt * (truth - mean_t_);
        c_pt_ += dp * (truth - mean_t_);
    }

    ErrorStats stats() const {
        ErrorStats s;
        s.n = n_;
        double k = static_cast<double>(n_);
        s.mae = abs_sum_ / k;
        s.rmse = std::sqrt(sq_sum_ / k);
        s.bias = sum_ / k;
        if (n_ >= 2 && m2_p_ > 0.0 && m2_t_ > 0.0)
            s.pearson_r = std::clamp(c_pt_ / std::sqrt(m2_p_ * m2_t_), -1.0, 1.0);
        return s;
    }

private:
    std::size_t n_ = 0;
    double abs_sum_ = 0.0, sum_ = 0.0, sq_sum_ = 0.0;
    double mean_p_ = 0.0, mean_t_ = 0.0, m2_p_ = 0.0, m2_t_ = 0.0, c_pt_ = 0.0;
};

} // namespace

ErrorStats summarize(std::span<const ScoredPair> pairs) {
    if (pairs.empty())
        throw Error("cannot summarize an empty error set");
    PairAccumulator acc;
    for (const auto& p : pairs)
        acc.add(p.pred, p.truth);
    return acc.stats();
}

std::optional<MetricSummary> build_summary(const std::string& model_id, Strategy strategy, std::string stratum,
                                           const ErrorSet& errors) {
    if (errors.pairs.empty())
        return std::nullopt;
    auto st = summarize(errors.pairs);
    MetricSummary s;
    s.model_id = model_id;
    s.strategy = strategy;
    s.stratum = std::move(stratum);
    s.n = errors.evaluated;
    s.mae_cm = st.mae;
    s.rmse_cm = st.rmse;
    s.bias_cm = st.bias;
    s.pearson_r = st.pearson_r;
    s.miss_count = errors.miss_count;
    s.excluded_count = errors.excluded_count;
    s.not_generalizable = errors.evaluated == 1;
    return s;
}

namespace {

using GroupKey = std::pair<std::string, Strategy>;

std::map<GroupKey, std::vector<Measurement>> group_measurements(std::span<const Measurement> measurements) {
    std::map<GroupKey, std::vector<Measurement>> groups;
    for (const auto& m : measurements)
        groups[{m.model_id, m.strategy}].push_back(m);
    return groups;
}

} // namespace

std::vector<MetricSummary> evaluate_groups(std::span<const Measurement> measurements, const TruthMap& truths,
                                           ScoringPolicy policy, ValueSource source) {
    std::vector<MetricSummary> out;
    for (const auto& [key, group] : group_measurements(measurements)) {
        auto errors = signed_errors(group, truths, policy, source);
        if (auto s = build_summary(key.first, key.second, "all", errors))
            out.push_back(std::move(*s));
    }
    return out;
}

StratumOf manual_reference_strata(const AnnotationView& annotations) {
    return [&annotations](const std::string& id) -> std::optional<std::string> {
        auto it = annotations.find(id);
        if (it == annotations.end())
            return std::nullopt;
        return std::string(to_string(it->second.reference));
    };
}

StratumOf distance_strata(const AnnotationView& annotations) {
    return [&annotations](const std::string& id) -> std::optional<std::string> {
        auto it = annotations.find(id);
        if (it == annotations.end())
            return std::nullopt;
        return std::string(to_string(it->second.distance));
    };
}

StratumOf step1_strata(std::map<std::string, ReferenceClass> step1_classes) {
    return [classes = std::move(step1_classes)](const std::string& id) -> std::optional<std::string> {
        auto it = classes.find(id);
        if (it == classes.end())
            return std::nullopt;
        return std::string(to_string(it->second));
    };
}

std::vector<MetricSummary> stratify(std::span<const Measurement> group, const TruthMap& truths,
                                    ScoringPolicy policy, ValueSource source, const StratumOf& stratum_of) {
    std::map<std::string, std::vector<Measurement>> strata;
    for (const auto& m : group)
        strata[stratum_of(m.sample_id).value_or("unannotated")].push_back(m);
    std::vector<MetricSummary> out;
    for (const auto& [label, members] : strata) {
        auto errors = signed_errors(members, truths, policy, source);
        if (auto s = build_summary(members.front().model_id, members.front().strategy, label, errors))
            out.push_back(std::move(*s));
    }
    return out;
}

std::vector<MissBar> miss_histogram(std::span<const Measurement> measurements, const AnnotationView& annotations) {
    std::vector<MissBar> bars;
    for (const auto& [key, group] : group_measurements(measurements)) {
        MissBar bar;
        bar.model_id = key.first;
        bar.strategy = key.second;
        for (const auto& m : group) {
            if (!m.miss || m.miss_reason == MissReason::provider_failure)
                continue;
            auto it = annotations.find(m.sample_id);
            if (it == annotations.end())
                ++bar.unannotated;
            else if (it->second.distance == DistanceClass::close_up)
                ++bar.close_up;
            else
                ++bar.distant;
        }
        bars.push_back(std::move(bar));
    }
    return bars;
}

std::string metrics_csv(std::span<const MetricSummary> rows) {
    std::string out(kMetricsCsvHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += csv::escape(r.model_id) + ',' + std::string(to_string(r.strategy)) + ',' + csv::escape(r.stratum) + ',' +
               std::to_string(r.n) + ',' + format_double(r.mae_cm) + ',' + format_double(r.rmse_cm) + ',' +
               format_double(r.bias_cm) + ',' + (r.pearson_r ? format_double(*r.pearson_r) : std::string("NA")) +
               ',' + std::to_string(r.miss_count) + '\n';
    }
    return out;
}

std::vector<MetricSummary> parse_metrics_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    auto rows = csv::read_all(in);
    if (rows.empty())
        throw Error("metrics csv is empty");
    std::vector<MetricSummary> out;
    auto number = [](const std::string& s) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw Error("metrics csv: bad number '" + s + "'");
        return v;
    };
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() == 1 && r[0].empty())
            continue;
        if (r.size() != 9)
            throw Error("metrics csv: row " + std::to_string(i) + " has " + std::to_string(r.size()) + " fields");
        MetricSummary s;
        s.model_id = r[0];
        auto strategy = parse_strategy(r[1]);
        if (!strategy)
            throw Error("metrics csv: bad strategy '" + r[1] + "'");
        s.strategy = *strategy;
        s.stratum = r[2];
        s.n = static_cast<std::size_t>(number(r[3]));
        s.mae_cm = number(r[4]);
        s.rmse_cm = number(r[5]);
        s.bias_cm = number(r[6]);
        if (r[7] != "NA")
            s.pearson_r = number(r[7]);
        s.miss_count = static_cast<std::size_t>(number(r[8]));
        s.not_generalizable = s.n == 1;
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace hailgauge
