#include "pakan/ablate.hpp"

#include <algorithm>
#include <sstream>

#include "pakan/error.hpp"
#include "pakan/metrics.hpp"

namespace pakan {

std::vector<AblationVariant> standard_variants() {
    return {{"full", true, true, true, true},    {"pa-_kan-", false, false, true, true}, {"pa-", false, true, true, true},
            {"kan-", true, false, true, true},   {"1d_only", true, true, true, false},   {"2d_only", true, true, false, true}};
}

AblationVariant find_variant(const std::string& name) {
    for (const auto& v : standard_variants())
        if (v.name == name) return v;
    throw ConfigError("unknown ablation variant '" + name + "'");
}

std::vector<AblationRun> run_ablation(const TrainConfig& base, const std::vector<AblationVariant>& variants,
                                      const std::vector<std::uint64_t>& seeds, const std::vector<SamplePair>& train_set,
                                      const std::vector<SamplePair>& val_set, const AblationCallback& on_run) {
    std::vector<AblationRun> runs;
    for (const auto& v : variants) {
        for (auto seed : seeds) {
            TrainConfig cfg = base;
            cfg.pa = v.pa;
            cfg.kan = v.kan;
            cfg.use_1d = v.use_1d;
            cfg.use_2d = v.use_2d;
            cfg.seed = seed;
            const auto res = train_network(cfg, train_set, val_set);
            AblationRun run{v.name, seed, res.net.params.total_elements(), res.log.back().val_l1, res.log.back().val_sam,
                            res.best_val_l1};
            runs.push_back(run);
            if (on_run) on_run(run);
        }
    }
    return runs;
}

const AblationRun& find_run(const std::vector<AblationRun>& runs, const std::string& variant, std::uint64_t seed) {
    for (const auto& r : runs)
        if (r.variant == variant && r.seed == seed) return r;
    throw ConfigError("no ablation run for variant '" + variant + "' seed " + std::to_string(seed));
}

std::string format_ablation_table(const std::vector<AblationRun>& runs) {
    std::ostringstream os;
    os << "variant\tseed\tparams\tfinal_val_l1\tfinal_val_sam\tbest_val_l1\n";
    std::vector<std::string> order;
    for (const auto& r : runs) {
        os << r.variant << '\t' << r.seed << '\t' << r.params << '\t' << format_real(r.final_val_l1) << '\t'
           << format_real(r.final_val_sam) << '\t' << format_real(r.best_val_l1) << '\n';
        if (std::find(order.begin(), order.end(), r.variant) == order.end()) order.push_back(r.variant);
    }
    os << "# mean over seeds\n";
    for (const auto& name : order) {
        double l1 = 0, s = 0;
        std::size_t n = 0, params = 0;
        for (const auto& r : runs) {
            if (r.variant != name) continue;
            l1 += r.final_val_l1;
            s += r.final_val_sam;
            params = r.params;
            ++n;
        }
        os << name << "\tmean\t" << params << '\t' << format_real(l1 / n) << '\t' << format_real(s / n) << "\t-\n";
    }
    return os.str();
}

}  // namespace pakan
