#include "destigma/evaluation.hpp"

#include "destigma/error.hpp"
#include "destigma/parallel.hpp"
#include "destigma/relevance.hpp"
#include "destigma/style.hpp"
#include "destigma/text.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace destigma {

using nlohmann::json;

PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& c) {
    if (c.tp + c.fp + c.fn == 0) {
        throw Error(Errc::EmptyConfusion, "tp + fp + fn = 0");
    }
    if (c.tp == 0) {
        return {};
    }
    const double tp = static_cast<double>(c.tp);
    PrecisionRecallF1 r;
    r.precision = tp / static_cast<double>(c.tp + c.fp);
    r.recall = tp / static_cast<double>(c.tp + c.fn);
    r.f1 = 2.0 * tp / static_cast<double>(2 * c.tp + c.fp + c.fn);
    return r;
}

double cohens_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.size() != b.size()) {
        throw Error(Errc::LengthMismatch, fmt::format("{} vs {} labels", a.size(), b.size()));
    }
    if (a.empty()) {
        throw Error(Errc::LengthMismatch, "no labels");
    }
    const double n = static_cast<double>(a.size());
    std::map<std::string, std::pair<std::size_t, std::size_t>> marginals;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++marginals[a[i]].first;
        ++marginals[b[i]].second;
        agree += a[i] == b[i] ? 1 : 0;
    }
    const double po = static_cast<double>(agree) / n;
    double pe = 0.0;
    for (const auto& [label, m] : marginals) {
        pe += (static_cast<double>(m.first) / n) * (static_cast<double>(m.second) / n);
    }
    if (pe >= 1.0) {
        if (agree == a.size()) {
            return 1.0;
        }
        throw Error(Errc::DegenerateMarginals, "chance agreement is 1");
    }
    return (po - pe) / (1.0 - pe);
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIterations = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) {
            return h;
        }
    }
    spdlog::warn("incomplete beta continued fraction did not converge (a={}, b={}, x={})", a, b, x);
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) {
        throw Error(Errc::Precondition, "incomplete beta needs a, b > 0");
    }
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) {
        throw Error(Errc::Precondition, "degrees of freedom must be positive");
    }
    if (std::isinf(t)) {
        return 0.0;
    }
    const double x = df / (df + t * t);
    return std::clamp(incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

void to_json(json& j, const TTestResult& r) {
    j = json{{"t", r.t}, {"df", r.df}, {"p", r.p}, {"mean_diff", r.mean_diff}};
}

TTestResult paired_t_test(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw Error(Errc::LengthMismatch, fmt::format("{} vs {} values", x.size(), y.size()));
    }
    if (x.size() < 2) {
        throw Error(Errc::TooFewPairs, fmt::format("{} pair(s)", x.size()));
    }
    const std::size_t n = x.size();
    std::vector<double> d(n);
    bool all_zero = true;
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = x[i] - y[i];
        all_zero = all_zero && d[i] == 0.0;
    }
    TTestResult r;
    r.df = static_cast<long>(n - 1);
    if (all_zero) {
        return r;
    }
    double mean = 0.0;
    for (const double v : d) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const double v : d) {
        ss += (v - mean) * (v - mean);
    }
    r.mean_diff = mean;
    if (ss == 0.0) {
        throw Error(Errc::ZeroVariance, fmt::format("constant difference {}", mean));
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    r.p = student_t_two_sided_p(r.t, static_cast<double>(r.df));
    return r;
}

void PsychLexicon::add(std::string_view term, const std::string& category) {
    auto key = text::to_lower_ascii(text::trim(term));
    if (key.empty() || category.empty()) {
        throw Error(Errc::Config, "empty psych lexicon entry");
    }
    if (std::find(categories_.begin(), categories_.end(), category) == categories_.end()) {
        categories_.push_back(category);
        std::sort(categories_.begin(), categories_.end());
    }
    if (key.back() == '*') {
        key.pop_back();
        prefixes_.emplace_back(std::move(key), category);
        return;
    }
    auto& cats = exact_[key];
    if (std::find(cats.begin(), cats.end(), category) == cats.end()) {
        cats.push_back(category);
    }
}

PsychLexicon PsychLexicon::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::Config, "cannot open psych lexicon " + path.string());
    }
    PsychLexicon lex;
    std::string line;
    while (std::getline(in, line)) {
        const auto trimmed = text::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') {
            continue;
        }
        const auto comma = trimmed.rfind(',');
        if (comma == std::string::npos) {
            throw Error(Errc::Config, "bad psych lexicon line: " + trimmed);
        }
        const auto term = text::trim(trimmed.substr(0, comma));
        const auto category = text::trim(trimmed.substr(comma + 1));
        if (term == "term" && category == "category") {
            continue;
        }
        lex.add(term, category);
    }
    return lex;
}

std::vector<std::string> PsychLexicon::categories() const { return categories_; }

std::vector<std::string> PsychLexicon::lookup(std::string_view token) const {
    std::vector<std::string> out;
    if (const auto it = exact_.find(std::string(token)); it != exact_.end()) {
        out = it->second;
    }
    for (const auto& [prefix, category] : prefixes_) {
        if (token.substr(0, prefix.size()) == prefix &&
            std::find(out.begin(), out.end(), category) == out.end()) {
            out.push_back(category);
        }
    }
    return out;
}

PsychFeatures feature_vector(std::string_view text, const PsychLexicon& lexicon, std::size_t bigword_letters) {
    const auto tokens = style::tokenize(text);
    if (tokens.empty()) {
        throw Error(Errc::EmptyText, "no tokens for feature extraction");
    }
    PsychFeatures f;
    for (const auto& c : lexicon.categories()) {
        f[c] = 0.0;
    }
    std::size_t big = 0;
    for (const auto& token : tokens) {
        for (const auto& c : lexicon.lookup(token)) {
            f[c] += 1.0;
        }
        const auto letters = std::count_if(token.begin(), token.end(),
                                           [](char ch) { return std::isalpha(static_cast<unsigned char>(ch)); });
        big += static_cast<std::size_t>(letters) >= bigword_letters ? 1 : 0;
    }
    const double n = static_cast<double>(tokens.size());
    for (auto& [c, v] : f) {
        v /= n;
    }
    f["bigwords"] = static_cast<double>(big) / n;
    f["punctuation_density"] = style::punctuation_profile(text).density;
    return f;
}

json to_json(const FeatureComparison& c) {
    auto rows = json::array();
    for (const auto& f : c.features) {
        json row{{"feature", f.feature},
                 {"mean_original", f.mean_original},
                 {"mean_rewrite", f.mean_rewrite},
                 {"flagged", f.flagged}};
        if (f.test) {
            row["test"] = *f.test;
        } else {
            row["test"] = nullptr;
            row["error"] = f.error;
        }
        rows.push_back(std::move(row));
    }
    return json{{"pairs", c.pairs},          {"alpha", c.alpha}, {"alpha_used", c.alpha_used},
                {"bonferroni", c.bonferroni}, {"features", rows}, {"flagged", c.flagged},
                {"note", c.note}};
}

FeatureComparison compare_corpora(const std::vector<std::string>& originals, const std::vector<std::string>& rewrites,
                                  const PsychLexicon& lexicon, const CompareOptions& options) {
    if (originals.size() != rewrites.size()) {
        throw Error(Errc::LengthMismatch, fmt::format("{} originals vs {} rewrites", originals.size(), rewrites.size()));
    }
    if (originals.size() < 2) {
        throw Error(Errc::TooFewPairs, fmt::format("{} pair(s)", originals.size()));
    }
    std::vector<PsychFeatures> a;
    std::vector<PsychFeatures> b;
    for (std::size_t i = 0; i < originals.size(); ++i) {
        a.push_back(feature_vector(originals[i], lexicon, options.bigword_letters));
        b.push_back(feature_vector(rewrites[i], lexicon, options.bigword_letters));
    }
    FeatureComparison out;
    out.pairs = originals.size();
    out.alpha = options.alpha;
    out.bonferroni = options.bonferroni;
    const std::size_t n_features = a.front().size();
    out.alpha_used = options.bonferroni ? options.alpha / static_cast<double>(n_features) : options.alpha;
    for (const auto& [feature, unused] : a.front()) {
        (void)unused;
        FeatureTest ft;
        ft.feature = feature;
        std::vector<double> x;
        std::vector<double> y;
        for (std::size_t i = 0; i < a.size(); ++i) {
            x.push_back(a[i].at(feature));
            y.push_back(b[i].at(feature));
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            ft.mean_original += x[i];
            ft.mean_rewrite += y[i];
        }
        ft.mean_original /= static_cast<double>(x.size());
        ft.mean_rewrite /= static_cast<double>(y.size());
        try {
            ft.test = paired_t_test(x, y);
            ft.flagged = ft.test->p < out.alpha_used;
        } catch (const Error& e) {
            ft.error = e.what();
        }
        if (ft.flagged) {
            out.flagged.push_back(feature);
        }
        out.features.push_back(std::move(ft));
    }
    out.note = options.bonferroni
                   ? fmt::format("{} tests, Bonferroni-corrected alpha {:.6g}", n_features, out.alpha_used)
                   : fmt::format("{} tests at alpha {:.6g} without multiple-comparison correction; about {:.2g} "
                                 "false positives expected under the null",
                                 n_features, out.alpha, out.alpha * static_cast<double>(n_features));
    return out;
}

std::vector<GoldItem> load_gold(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::Io, "cannot read gold file " + path.string());
    }
    std::vector<GoldItem> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error(Errc::MalformedInput, fmt::format("{}:{}: not a JSON object", path.string(), line_no));
        }
        GoldItem g;
        g.id = j.value("id", "");
        g.text = j.value("text", "");
        const auto label = text::to_lower_ascii(j.value("label", ""));
        if (label == "d" || label == "drug") {
            g.drug = true;
        } else if (label != "nd" && label != "nondrug" && label != "non-drug") {
            throw Error(Errc::MalformedInput, fmt::format("{}:{}: label must be D or ND", path.string(), line_no));
        }
        out.push_back(std::move(g));
    }
    if (out.empty()) {
        throw Error(Errc::EmptyGold, path.string());
    }
    return out;
}

std::vector<BenchmarkRow> benchmark_providers(const std::vector<GoldItem>& gold,
                                              const std::vector<std::string>& providers, Gateway& gateway,
                                              const std::string& template_id, std::size_t workers) {
    if (gold.empty()) {
        throw Error(Errc::EmptyGold, "no gold items");
    }
    std::vector<BenchmarkRow> rows;
    for (const auto& provider : providers) {
        BenchmarkRow row;
        row.provider = provider;
        try {
            const auto& cfg = gateway.provider_config(provider);
            row.model_id = cfg.model_id;
            row.rpm = static_cast<long>(cfg.limits.rpm);
            const double cost_before = gateway.ledger().usage(cfg.model_id).usd_estimate;
            std::vector<std::optional<bool>> predicted(gold.size());
            const auto start = std::chrono::steady_clock::now();
            parallel_for(gold.size(), workers, [&](std::size_t i) {
                CleanPost post;
                post.id = gold[i].id;
                post.body = gold[i].text;
                try {
                    predicted[i] =
                        detect_drug_relevance(post, gateway, provider, template_id).label == RelevanceLabel::Drug;
                } catch (const Error& e) {
                    if (e.code() != Errc::ParseFailure) {
                        throw;
                    }
                }
            });
            row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            row.cost_usd = gateway.ledger().usage(cfg.model_id).usd_estimate - cost_before;
            for (std::size_t i = 0; i < gold.size(); ++i) {
                const bool p = predicted[i].value_or(false);
                row.parse_failures += predicted[i] ? 0 : 1;
                if (p && gold[i].drug) ++row.confusion.tp;
                else if (p) ++row.confusion.fp;
                else if (gold[i].drug) ++row.confusion.fn;
                else ++row.confusion.tn;
            }
            try {
                row.scores = precision_recall_f1(row.confusion);
            } catch (const Error& e) {
                row.error = e.what();
            }
        } catch (const Error& e) {
            row.failed = true;
            row.error = e.what();
            spdlog::warn("benchmark: provider {} failed: {}", provider, e.what());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows) {
    std::string out = "provider,model,f1,precision,recall,tp,fp,fn,tn,parse_failures,seconds,cost_usd,rpm,status\n";
    for (const auto& r : rows) {
        const auto fmt_opt = [&](double PrecisionRecallF1::*m) {
            return r.scores ? fmt::format("{:.6f}", (*r.scores).*m) : std::string();
        };
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{:.3f},{:.6f},{},{}\n", r.provider, r.model_id,
                           fmt_opt(&PrecisionRecallF1::f1), fmt_opt(&PrecisionRecallF1::precision),
                           fmt_opt(&PrecisionRecallF1::recall), r.confusion.tp, r.confusion.fp, r.confusion.fn,
                           r.confusion.tn, r.parse_failures, r.seconds, r.cost_usd, r.rpm,
                           r.failed ? "failed" : "ok");
    }
    return out;
}

void to_json(json& j, const Judgment& v) {
    j = json{{"task_id", v.task_id},
             {"reviewer_id", v.reviewer_id},
             {"best_quality", v.best_quality},
             {"most_destigmatized", v.most_destigmatized},
             {"most_faithful", v.most_faithful},
             {"comments", v.comments},
             {"submitted_at", v.submitted_at}};
}

void from_json(const json& j, Judgment& v) {
    j.at("task_id").get_to(v.task_id);
    j.at("reviewer_id").get_to(v.reviewer_id);
    auto opt = [&](const char* key) {
        const auto it = j.find(key);
        return it == j.end() || it->is_null() ? std::string() : it->get<std::string>();
    };
    v.best_quality = opt("best_quality");
    v.most_destigmatized = opt("most_destigmatized");
    v.most_faithful = opt("most_faithful");
    v.comments = opt("comments");
    v.submitted_at = opt("submitted_at");
}

std::size_t RankingTally::column_sum(std::size_t criterion) const {
    std::size_t sum = 0;
    for (const auto& [system, row] : counts) {
        sum += row.at(criterion);
    }
    return sum;
}

std::string RankingTally::to_csv() const {
    std::string out = "system";
    for (const auto c : kRankingCriteria) {
        out += "," + std::string(c);
    }
    out += "\n";
    for (const auto& s : systems) {
        const auto& row = counts.at(s);
        out += fmt::format("{},{},{},{}\n", s, row[0], row[1], row[2]);
    }
    return out;
}

json RankingTally::to_json() const {
    auto rows = json::array();
    for (const auto& s : systems) {
        const auto& row = counts.at(s);
        json r{{"system", s}};
        for (std::size_t c = 0; c < kRankingCriteria.size(); ++c) {
            r[std::string(kRankingCriteria[c])] = row[c];
        }
        rows.push_back(std::move(r));
    }
    return json{{"rows", rows}, {"complete", complete}, {"incomplete", incomplete}, {"rejected", rejected}};
}

RankingTally tally_rankings(const std::vector<Judgment>& judgments, const BlindingMap& blinding,
                            const std::vector<std::string>& systems) {
    RankingTally t;
    t.systems = systems;
    for (const auto& s : systems) {
        t.counts[s] = {0, 0, 0};
    }
    for (const auto& j : judgments) {
        const auto task = blinding.find(j.task_id);
        if (task == blinding.end()) {
            ++t.rejected;
            continue;
        }
        const std::array<const std::string*, 3> picks{&j.best_quality, &j.most_destigmatized, &j.most_faithful};
        bool valid = true;
        for (const auto* p : picks) {
            if (!p->empty()) {
                const auto it = task->second.find(*p);
                valid = valid && it != task->second.end() && t.counts.count(it->second) > 0;
            }
        }
        if (!valid) {
            ++t.rejected;
            continue;
        }
        if (!j.complete()) {
            ++t.incomplete;
            continue;
        }
        ++t.complete;
        for (std::size_t c = 0; c < picks.size(); ++c) {
            ++t.counts[task->second.at(*picks[c])][c];
        }
    }
    return t;
}

}  // namespace destigma
