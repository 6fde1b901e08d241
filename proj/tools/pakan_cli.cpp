// pakan: dataset synthesis, training, evaluation and inference from the shell.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pakan/ablate.hpp"
#include "pakan/error.hpp"
#include "pakan/gradcheck.hpp"
#include "pakan/metrics.hpp"
#include "pakan/tiling.hpp"
#include "pakan/train.hpp"

namespace {

constexpr int kUsageError = 2;
constexpr int kNumericalFailure = 1;

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw pakan::Error("cannot open '" + path + "' for writing");
    os << text;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stoull(tok));
        } catch (const std::exception&) {
            throw pakan::ConfigError("bad seed '" + tok + "'");
        }
    }
    if (out.empty()) throw pakan::ConfigError("no seeds given");
    return out;
}

pakan::Tensor predict_with(const std::string& predictor, const pakan::PansharpNet* net, const pakan::SamplePair& s) {
    if (predictor == "gt") return s.gt;
    if (predictor == "bilinear") {
        return pakan::drop_batch(pakan::resample_value(pakan::as_batch(s.lr_ms), pakan::Resample::bilinear_up, 4));
    }
    return pakan::tile_infer(*net, s.lr_ms, s.pan);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pixel-adaptive KAN pansharpening toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic dataset");
    std::uint64_t synth_seed = 0;
    std::size_t synth_count = 64, synth_bands = 4;
    std::string synth_out;
    synth->add_option("--seed", synth_seed, "Dataset seed");
    synth->add_option("--count", synth_count, "Number of samples")->check(CLI::Range(3, 100000));
    synth->add_option("--bands", synth_bands, "Spectral bands")->check(CLI::Range(1, 8));
    synth->add_option("--out,--out-dir", synth_out, "Output directory")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a network from a config file");
    std::string config_path;
    std::map<std::string, std::string> overrides;
    train_cmd->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    for (const auto& key : pakan::TrainConfig::keys()) {
        train_cmd->add_option_function<std::string>(
            "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; }, "Overrides '" + key + "'");
    }

    // eval-reduced / eval-full
    std::string ev_ckpt, ev_data, ev_split = "test", ev_out, ev_predictor = "network";
    auto add_eval = [&](const char* name, const char* help) {
        auto* c = app.add_subcommand(name, help);
        c->add_option("--checkpoint", ev_ckpt, "Checkpoint (.pktn)")->check(CLI::ExistingFile);
        c->add_option("--dataset", ev_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
        c->add_option("--split", ev_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
        c->add_option("--out", ev_out, "Report path (default stdout)");
        c->add_option("--predictor", ev_predictor, "network, gt or bilinear")
            ->check(CLI::IsMember({"network", "gt", "bilinear"}));
        return c;
    };
    auto* eval_reduced = add_eval("eval-reduced", "PSNR/SAM/ERGAS/Q2n against ground truth");
    auto* eval_full = add_eval("eval-full", "D_lambda/D_s/HQNR without reference");

    // infer
    auto* infer = app.add_subcommand("infer", "Tiled inference on one sample");
    std::string in_ckpt, in_sample, in_out, in_png, in_residual;
    std::vector<std::size_t> in_bands{0, 1, 2};
    infer->add_option("--checkpoint", in_ckpt, "Checkpoint (.pktn)")->required()->check(CLI::ExistingFile);
    infer->add_option("--sample", in_sample, "PKTN with lr_ms and pan entries")->required()->check(CLI::ExistingFile);
    infer->add_option("--out", in_out, "Output PKTN (entry 'pred')")->required();
    infer->add_option("--png", in_png, "RGB composite of the prediction");
    infer->add_option("--residual", in_residual, "Residual map of band 0 against gt (needs a gt entry)");
    infer->add_option("--bands", in_bands, "Band triplet for the composite")->expected(3);

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every operator");
    std::uint64_t gc_seed = 0;
    gradcheck->add_option("--seed", gc_seed, "Seed for inputs and parameters");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Train the variant grid and compare");
    std::string ab_data, ab_seeds = "0,1,2", ab_out, ab_config;
    std::vector<std::string> ab_variants;
    std::size_t ab_epochs = 60;
    ablate->add_option("--dataset", ab_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    ablate->add_option("--config", ab_config, "Base config file")->check(CLI::ExistingFile);
    ablate->add_option("--epochs", ab_epochs, "Epochs per run");
    ablate->add_option("--seeds", ab_seeds, "Comma-separated seeds");
    ablate->add_option("--variants", ab_variants, "Subset of: full pa-_kan- pa- kan- 1d_only 2d_only");
    ablate->add_option("--out", ab_out, "Table path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return kUsageError;
    }

    try {
        if (*synth) {
            const auto m = pakan::write_dataset(synth_out, synth_seed, synth_count, synth_bands);
            std::cout << "wrote " << m.rows.size() << " samples to " << synth_out << "\n";
        } else if (*train_cmd) {
            pakan::TrainConfig cfg = config_path.empty() ? pakan::TrainConfig{} : pakan::load_train_config(config_path);
            for (const auto& [k, v] : overrides) cfg.set(k, v);
            if (cfg.dataset.empty()) throw pakan::ConfigError("no dataset given (config key 'dataset' or --dataset)");
            if (!std::filesystem::is_directory(cfg.dataset)) throw pakan::ConfigError("dataset '" + cfg.dataset + "' not found");
            std::cout << pakan::format_log_header() << "\n";
            const auto res = pakan::train(cfg, [](const pakan::EpochLog& e) { std::cout << pakan::format_log_line(e) << "\n" << std::flush; });
            std::cout << "best epoch " << res.best_epoch << " val_l1 " << pakan::format_real(res.best_val_l1)
                      << " -> " << cfg.checkpoint << "\n";
        } else if (*eval_reduced || *eval_full) {
            std::optional<pakan::PansharpNet> net;
            if (ev_predictor == "network") {
                if (ev_ckpt.empty()) throw pakan::ConfigError("--checkpoint is required with the network predictor");
                net = pakan::load_checkpoint(ev_ckpt);
            }
            const auto m = pakan::read_manifest(ev_data);
            const auto samples = pakan::load_split(ev_data, m, pakan::parse_split(ev_split));
            pakan::MetricReport report;
            report.resolution = *eval_full ? pakan::Resolution::full : pakan::Resolution::reduced;
            for (const auto& s : samples) {
                const pakan::Tensor pred = predict_with(ev_predictor, net ? &*net : nullptr, s);
                report.add(s.id, *eval_full ? pakan::full_metrics(pred, s.lr_ms, s.pan) : pakan::reduced_metrics(pred, s.gt));
            }
            write_text(ev_out, report.to_tsv());
        } else if (*infer) {
            const auto net = pakan::load_checkpoint(in_ckpt);
            const auto entries = pakan::pktn_read(in_sample);
            const auto& ms = pakan::find_entry(entries, "lr_ms");
            const pakan::Tensor pred = pakan::tile_infer(net, ms, pakan::find_entry(entries, "pan"));
            if (!pred.all_finite()) {
                std::cerr << "error: prediction contains non-finite values\n";
                return kNumericalFailure;
            }
            pakan::pktn_write(in_out, {{"pred", pred}});
            if (!in_png.empty()) pakan::export_png(pred, {in_bands[0], in_bands[1], in_bands[2]}, in_png);
            if (!in_residual.empty()) {
                const auto& gt = pakan::find_entry(entries, "gt");
                const std::size_t plane = pred.dim(1) * pred.dim(2);
                pakan::Tensor r({1, pred.dim(1), pred.dim(2)});
                for (std::size_t i = 0; i < plane; ++i) r[i] = pred[i] - gt[i];
                pakan::export_residual_png(r, in_residual);
            }
            std::cout << "wrote " << in_out << "\n";
        } else if (*gradcheck) {
            bool ok = true;
            for (const auto& r : pakan::run_gradcheck_suite(gc_seed)) {
                std::cout << r.name << "\tmax_rel_err=" << pakan::format_real(r.max_rel_error) << "\tprobes=" << r.checked
                          << "\t" << (r.passed ? "ok" : "FAIL") << "\n";
                ok = ok && r.passed;
            }
            return ok ? 0 : kNumericalFailure;
        } else if (*ablate) {
            pakan::TrainConfig base = ab_config.empty() ? pakan::TrainConfig{} : pakan::load_train_config(ab_config);
            base.epochs = ab_epochs;
            std::vector<pakan::AblationVariant> variants;
            if (ab_variants.empty()) variants = pakan::standard_variants();
            for (const auto& n : ab_variants) variants.push_back(pakan::find_variant(n));
            const auto m = pakan::read_manifest(ab_data);
            const auto tr = pakan::load_split(ab_data, m, pakan::Split::train);
            const auto va = pakan::load_split(ab_data, m, pakan::Split::val);
            const auto runs = pakan::run_ablation(base, variants, parse_seeds(ab_seeds), tr, va, [](const pakan::AblationRun& r) {
                std::cerr << r.variant << " seed " << r.seed << ": val_l1 " << pakan::format_real(r.final_val_l1) << "\n";
            });
            write_text(ab_out, pakan::format_ablation_table(runs));
        }
    } catch (const pakan::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const pakan::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const pakan::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericalFailure;
    }
    return 0;
}
