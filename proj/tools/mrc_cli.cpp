#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "mrc/pipeline.hpp"

using namespace mrc;

namespace {

const std::vector<std::string> kRunKeys = {
    "max_corners", "quality_level", "min_distance", "block_size", "mask_dilation",
    "corner_margin", "lk_window", "lk_levels", "lk_iters", "lk_eps", "lk_min_eig",
    "rho_th", "gof", "dense", "dense_stride", "regressor", "gpr_sigma_n", "gpr_kernel",
    "gpr_vbar_th", "warp_k", "warp_power", "seed", "threads"};

const std::vector<std::string> kPhantomKeys = {
    "width", "height", "amplitude_px", "period_frames", "gamma", "phase",
    "contrasted_frames", "live_frames", "seed", "pixel_spacing_mm", "vessel_radius_px",
    "vessel_darkness"};

// Registers one string option per config key; flags win over the config file.
struct KeyOverrides {
    std::map<std::string, std::string> values;

    void attach(CLI::App* cmd, const std::vector<std::string>& keys) {
        for (const auto& key : keys) {
            cmd->add_option_function<std::string>(
                "--" + key, [this, key](const std::string& v) { values[key] = v; },
                "override config key " + key);
        }
    }
};

RunConfig make_run_config(const std::string& config_path, const KeyOverrides& overrides) {
    RunConfig cfg;
    if (!config_path.empty()) cfg.apply(parse_kv_file(config_path));
    cfg.apply(overrides.values);
#ifdef _OPENMP
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
    return cfg;
}

PhantomConfig make_phantom_config(const std::string& config_path, const KeyOverrides& overrides) {
    PhantomConfig cfg;
    if (!config_path.empty()) cfg = phantom_config_from_file(config_path);
    for (const auto& [key, value] : overrides.values) {
        try {
            if (key == "width") cfg.width = std::stoi(value);
            else if (key == "height") cfg.height = std::stoi(value);
            else if (key == "amplitude_px") cfg.amplitude_px = std::stod(value);
            else if (key == "period_frames") cfg.period_frames = std::stod(value);
            else if (key == "gamma") cfg.gamma = std::stod(value);
            else if (key == "phase") cfg.phase = std::stod(value);
            else if (key == "contrasted_frames") cfg.contrasted_frames = std::stoi(value);
            else if (key == "live_frames") cfg.live_frames = std::stoi(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "pixel_spacing_mm") cfg.pixel_spacing_mm = std::stod(value);
            else if (key == "vessel_radius_px") cfg.vessel_radius_px = std::stod(value);
            else if (key == "vessel_darkness") cfg.vessel_darkness = std::stod(value);
        } catch (const std::exception&) {
            throw ConfigError("bad value for " + key + ": '" + value + "'");
        }
    }
    return cfg;
}

bool is_gpr_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + p.string());
    char magic[4] = {};
    in.read(magic, 4);
    return std::string(magic, 4) == "GPR1";
}

struct PredictOutputs {
    std::vector<FrameScore> scores;
    std::vector<double> predict_times;
};

PredictOutputs run_prediction(const FluoroSequence& seq, const VesselMask& ref_mask,
                              const CornerSet& corners, const TrainedModel& model,
                              const RunConfig& cfg, const std::filesystem::path& data_dir,
                              const std::filesystem::path& out_dir, bool write_files) {
    if (write_files) std::filesystem::create_directories(out_dir);
    Pyramid ref_pyr = build_pyramid(seq.reference(), cfg.lk.pyramid_levels);
    PredictOutputs out;
    char name[64];
    for (const Frame& f : seq.frames) {
        if (f.contrasted) continue;
        FrameResult r = predict_frame(model, corners, ref_pyr, f, ref_mask, cfg);
        out.predict_times.push_back(r.predict_time_s);
        if (write_files) {
            std::snprintf(name, sizeof(name), "warped_%04d.pgm", f.index);
            save_mask(r.warped, out_dir / name);
            std::snprintf(name, sizeof(name), "overlay_%04d.png", f.index);
            write_overlay(f, r.warped, out_dir / name);
        }
        std::snprintf(name, sizeof(name), "gt_centerline_%04d.pgm", f.index);
        auto gt_path = data_dir / name;
        if (std::filesystem::exists(gt_path)) {
            VesselMask gt = load_mask(gt_path, MaskKind::Centerline);
            FrameScore s;
            s.frame_index = f.index;
            s.n_gt_points = static_cast<int>(gt.count());
            s.R = ratio_R(gt, r.warped);
            s.MD = mean_distance(gt, r.warped, seq.pixel_spacing_mm);
            out.scores.push_back(s);
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vascular respiratory motion compensation for fluoroscopy roadmapping"};
    app.require_subcommand(1);

    std::string config_path, data_dir, manifest_path, mask_path, model_path, out_path;
    std::string pred_dir;
    KeyOverrides run_overrides, phantom_overrides;

    auto* cmd_phantom = app.add_subcommand("phantom", "generate a synthetic ground-truthed dataset");
    cmd_phantom->add_option("--out", out_path, "output directory")->required();
    cmd_phantom->add_option("--config", config_path, "phantom key=value config file");
    phantom_overrides.attach(cmd_phantom, kPhantomKeys);

    auto* cmd_train = app.add_subcommand("train", "fit the motion model on the contrasted segment");
    cmd_train->add_option("--data", data_dir, "sequence directory")->required();
    cmd_train->add_option("--manifest", manifest_path, "manifest file (default: <data>/manifest.txt)");
    cmd_train->add_option("--mask", mask_path, "reference vessel mask (default: <data>/reference_mask.pgm)");
    cmd_train->add_option("--out", out_path, "model output file")->required();
    cmd_train->add_option("--config", config_path, "run key=value config file");
    run_overrides.attach(cmd_train, kRunKeys);

    auto* cmd_predict = app.add_subcommand("predict", "predict vascular motion on live frames");
    cmd_predict->add_option("--data", data_dir, "sequence directory")->required();
    cmd_predict->add_option("--manifest", manifest_path, "manifest file");
    cmd_predict->add_option("--mask", mask_path, "reference vessel mask");
    cmd_predict->add_option("--model", model_path, "trained model file")->required();
    cmd_predict->add_option("--out", out_path, "output directory")->required();
    cmd_predict->add_option("--config", config_path, "run key=value config file");
    run_overrides.attach(cmd_predict, kRunKeys);

    auto* cmd_evaluate = app.add_subcommand("evaluate", "score warped masks against ground truth");
    cmd_evaluate->add_option("--pred", pred_dir, "directory of warped_NNNN.pgm masks")->required();
    cmd_evaluate->add_option("--data", data_dir, "sequence directory with gt centerlines")->required();
    cmd_evaluate->add_option("--manifest", manifest_path, "manifest file");
    cmd_evaluate->add_option("--out", out_path, "scores CSV path")->required();

    auto* cmd_ablate = app.add_subcommand("ablate", "sparse/dense x GOF on/off ablation table");
    cmd_ablate->add_option("--data", data_dir, "sequence directory")->required();
    cmd_ablate->add_option("--manifest", manifest_path, "manifest file");
    cmd_ablate->add_option("--mask", mask_path, "reference vessel mask");
    cmd_ablate->add_option("--out", out_path, "ablation CSV path")->required();
    cmd_ablate->add_option("--config", config_path, "run key=value config file");
    run_overrides.attach(cmd_ablate, kRunKeys);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (manifest_path.empty()) manifest_path = (std::filesystem::path(data_dir) / "manifest.txt").string();
        if (mask_path.empty()) mask_path = (std::filesystem::path(data_dir) / "reference_mask.pgm").string();

        if (cmd_phantom->parsed()) {
            PhantomConfig cfg = make_phantom_config(config_path, phantom_overrides);
            PhantomDataset ds = generate_phantom(cfg);
            save_phantom(ds, out_path);
            std::cout << "phantom: " << ds.sequence.frames.size() << " frames written to "
                      << out_path << "\n";
        } else if (cmd_train->parsed()) {
            RunConfig cfg = make_run_config(config_path, run_overrides);
            FluoroSequence seq = load_sequence(data_dir, manifest_path);
            VesselMask mask = load_mask(mask_path);
            TrainingData td = collect_training_data(seq, mask, cfg);
            TrainedModel tm = train_regressor(td, cfg);
            if (tm.mrc) save_model(*tm.mrc, out_path);
            else save_ensemble(*tm.gpr, out_path);
            std::cout << "train: N_v=" << td.corners.vascular.size()
                      << " N_n=" << td.corners.non_vascular.size()
                      << " learn_time_s=" << tm.learn_time_s << " -> " << out_path << "\n";
        } else if (cmd_predict->parsed()) {
            RunConfig cfg = make_run_config(config_path, run_overrides);
            FluoroSequence seq = load_sequence(data_dir, manifest_path);
            VesselMask mask = load_mask(mask_path);
            TrainedModel tm;
            CornerSet corners;
            if (is_gpr_file(model_path)) {
                tm.gpr = load_ensemble(model_path);
                corners = tm.gpr->corners;
            } else {
                tm.mrc = load_model(model_path);
                corners = tm.mrc->corners;
            }
            auto res = run_prediction(seq, mask, corners, tm, cfg, data_dir, out_path, true);
            write_scores_csv(res.scores, res.predict_times,
                             std::filesystem::path(out_path) / "scores.csv");
            std::cout << "predict: " << res.predict_times.size() << " live frames, "
                      << res.scores.size() << " scored -> " << out_path << "\n";
        } else if (cmd_evaluate->parsed()) {
            FluoroSequence seq = load_sequence(data_dir, manifest_path);
            std::vector<FrameScore> scores;
            char name[64];
            for (const Frame& f : seq.frames) {
                if (f.contrasted) continue;
                std::snprintf(name, sizeof(name), "warped_%04d.pgm", f.index);
                auto wp = std::filesystem::path(pred_dir) / name;
                std::snprintf(name, sizeof(name), "gt_centerline_%04d.pgm", f.index);
                auto gp = std::filesystem::path(data_dir) / name;
                if (!std::filesystem::exists(wp) || !std::filesystem::exists(gp)) continue;
                VesselMask warped = load_mask(wp);
                VesselMask gt = load_mask(gp, MaskKind::Centerline);
                FrameScore s;
                s.frame_index = f.index;
                s.n_gt_points = static_cast<int>(gt.count());
                s.R = ratio_R(gt, warped);
                s.MD = mean_distance(gt, warped, seq.pixel_spacing_mm);
                scores.push_back(s);
            }
            if (scores.empty()) throw DataError("evaluate: no (warped, gt) frame pairs found");
            write_scores_csv(scores, {}, out_path);
            std::cout << "evaluate: " << scores.size() << " frames -> " << out_path << "\n";
        } else if (cmd_ablate->parsed()) {
            RunConfig base = make_run_config(config_path, run_overrides);
            FluoroSequence seq = load_sequence(data_dir, manifest_path);
            VesselMask mask = load_mask(mask_path);
            std::ofstream out(out_path);
            if (!out) throw DataError("cannot write " + out_path);
            out << "flow,gof,MD_mm,R,predict_time_s,learn_time_s\n";
            for (bool dense : {false, true}) {
                RunConfig cfg = base;
                cfg.dense = dense;
                TrainingData td = collect_training_data(seq, mask, cfg);
                TrainedModel tm = train_regressor(td, cfg);
                for (bool gof : {true, false}) {
                    cfg.gof = gof;
                    auto res = run_prediction(seq, mask, td.corners, tm, cfg, data_dir, "", false);
                    double md = 0, r = 0, pt = 0;
                    for (const auto& s : res.scores) {
                        md += s.MD;
                        r += s.R;
                    }
                    for (double t : res.predict_times) pt += t;
                    size_t ns = std::max<size_t>(res.scores.size(), 1);
                    size_t nt = std::max<size_t>(res.predict_times.size(), 1);
                    out << (dense ? "dense" : "sparse") << "," << (gof ? "on" : "off") << ","
                        << md / ns << "," << r / ns << "," << pt / nt << ","
                        << tm.learn_time_s << "\n";
                }
            }
            std::cout << "ablate -> " << out_path << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
