// pcghr - batch phonocardiogram heart-rate analysis for canine recordings.
//
// Subcommands: analyze, evaluate, subsample, synth. Machine outputs are
// JSON/CSV files under --out; diagnostics go to stderr. Exit codes: 0 ok,
// 1 usage, 2 I/O, 3 data format.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcg/eval.hpp"
#include "pcg/pipeline.hpp"
#include "pcg/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

int exit_code_for(pcg::Errc c) {
    switch (c) {
        case pcg::Errc::NotFound:
        case pcg::Errc::IoError:
            return 2;
        case pcg::Errc::InvalidSpec:
        case pcg::Errc::InvalidArgument:
        case pcg::Errc::InvalidConfig:
        case pcg::Errc::InvalidRate:
        case pcg::Errc::InvalidBand:
            return 1;
        default:
            return 3;
    }
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Everything that determines the outputs goes in; timestamps stay out, so
// identical runs share a run id.
std::string make_run_id(const std::vector<std::string>& parts) {
    std::string joined;
    for (const auto& p : parts) {
        joined += p;
        joined += '\x1f';
    }
    return hex64(fnv1a64(joined));
}

std::string iso_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::atomic<unsigned> g_tmp_counter{0};

void atomic_write(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(g_tmp_counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) pcg::fail(pcg::Errc::IoError, "write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) pcg::fail(pcg::Errc::NotFound, path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_manifest(const fs::path& out_dir, const std::string& run_id, const std::string& command,
                    const ordered_json& params, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    ordered_json m;
    m["run_id"] = run_id;
    m["tool"] = "pcghr";
    m["version"] = kToolVersion;
    m["command"] = command;
    m["params"] = params;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["timestamp"] = iso_timestamp();
    atomic_write(out_dir / "manifest.json", m.dump(2) + "\n");
}

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    std::string out_dir = "out";
};

// ---- analyze ----

int cmd_analyze(const std::vector<std::string>& inputs, const std::string& variant_str,
                const CommonOpts& opts) {
    const pcg::Variant variant = pcg::variant_from_name(variant_str);
    pcg::PipelineConfig config;
    std::string config_text;
    if (!opts.config_path.empty()) {
        config_text = read_text(opts.config_path);
        config = pcg::parse_config_text(config_text);
    }

    std::vector<std::string> stems;
    std::set<std::string> seen;
    for (const auto& in : inputs) {
        const std::string stem = fs::path(in).stem().string();
        if (!seen.insert(stem).second) {
            std::cerr << "pcghr: duplicate input basename '" << stem << "'\n";
            return 1;
        }
        stems.push_back(stem);
    }

    std::vector<std::string> id_parts = {"analyze", variant_name(variant), config_text};
    std::vector<std::string> sorted_stems = stems;
    std::sort(sorted_stems.begin(), sorted_stems.end());
    id_parts.insert(id_parts.end(), sorted_stems.begin(), sorted_stems.end());
    const std::string run_id = make_run_id(id_parts);

    fs::create_directories(opts.out_dir);

    struct Outcome {
        int status = 0;
        std::string message;
        std::string output;
    };
    std::vector<Outcome> outcomes(inputs.size());
    std::atomic<size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= inputs.size()) return;
            Outcome& oc = outcomes[i];
            try {
                const pcg::AudioBuffer buf = pcg::load_wav(inputs[i]);
                const pcg::AnalysisReport report = pcg::analyze(buf, variant, config);
                ordered_json j = ordered_json::parse(pcg::report_to_json(report));
                j["run_id"] = run_id;
                const fs::path out_path = fs::path(opts.out_dir) / (stems[i] + ".json");
                atomic_write(out_path, j.dump(2) + "\n");
                oc.output = out_path.string();
            } catch (const pcg::Error& e) {
                oc.status = exit_code_for(e.code());
                oc.message = inputs[i] + ": " + e.what();
            } catch (const std::exception& e) {
                oc.status = 2;
                oc.message = inputs[i] + ": " + e.what();
            }
        }
    };

    const unsigned jobs = std::clamp(opts.jobs, 1u, 64u);
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    int status = 0;
    std::vector<std::string> outputs;
    for (const Outcome& oc : outcomes) {
        if (!oc.message.empty()) std::cerr << "pcghr: " << oc.message << "\n";
        if (!oc.output.empty()) outputs.push_back(oc.output);
        status = std::max(status, oc.status);
    }

    ordered_json params;
    params["variant"] = variant_name(variant);
    params["config"] = opts.config_path.empty() ? ordered_json(nullptr) : ordered_json(config_text);
    params["jobs"] = jobs;
    write_manifest(opts.out_dir, run_id, "analyze", params, inputs, outputs);
    return status;
}

// ---- evaluate ----

int parse_stage_field(const nlohmann::json& j) {
    if (j.is_string()) return pcg::kStageFailed;  // "FAILED"
    return j.get<int>();
}

int cmd_evaluate(const std::string& reports_dir, const std::string& annotations_dir,
                 double qs_threshold, const CommonOpts& opts) {
    std::vector<fs::path> report_files;
    for (const auto& entry : fs::directory_iterator(reports_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        const std::string name = entry.path().filename().string();
        if (name == "manifest.json" || name == "summary.json") continue;
        report_files.push_back(entry.path());
    }
    std::sort(report_files.begin(), report_files.end());
    if (report_files.empty()) pcg::fail(pcg::Errc::EmptyList, "no reports in " + reports_dir);

    std::vector<pcg::RecordingResult> results;
    std::vector<std::string> stems;
    for (const fs::path& rp : report_files) {
        const std::string stem = rp.stem().string();
        const fs::path ann_path = fs::path(annotations_dir) / (stem + ".ann");
        if (!fs::exists(ann_path))
            pcg::fail(pcg::Errc::MissingPair, "no annotation for report '" + stem + "'");

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_text(rp));
        } catch (const nlohmann::json::exception& ex) {
            pcg::fail(pcg::Errc::ParseError, rp.string() + ": " + ex.what());
        }
        pcg::RecordingResult r;
        r.id = stem;
        r.hr_gt = pcg::ground_truth_hr(pcg::parse_annotations(ann_path));
        if (j.contains("hr_bpm") && !j["hr_bpm"].is_null()) {
            r.hr_est = j["hr_bpm"].get<double>();
            r.error_pct = pcg::hr_error_pct(*r.hr_est, r.hr_gt);
        }
        r.quality_score = j.value("quality_score", 0);
        r.stage_reached = j.contains("stage_reached") ? parse_stage_field(j["stage_reached"])
                                                      : pcg::kStageFailed;
        r.variant = j.value("variant", "PRIMARY");
        results.push_back(std::move(r));
        stems.push_back(stem);
    }

    const pcg::EvalSummary summary = pcg::summarize(results, qs_threshold);

    char qs_buf[32];
    std::snprintf(qs_buf, sizeof qs_buf, "%.6g", qs_threshold);
    std::vector<std::string> id_parts = {"evaluate", qs_buf};
    id_parts.insert(id_parts.end(), stems.begin(), stems.end());
    const std::string run_id = make_run_id(id_parts);

    fs::create_directories(opts.out_dir);
    atomic_write(fs::path(opts.out_dir) / "results.csv", pcg::results_to_csv(results));
    ordered_json sj = ordered_json::parse(pcg::summary_to_json(summary));
    sj["run_id"] = run_id;
    atomic_write(fs::path(opts.out_dir) / "summary.json", sj.dump(2) + "\n");
    atomic_write(fs::path(opts.out_dir) / "summary.csv", pcg::summary_to_csv(summary));

    ordered_json params;
    params["qs_threshold"] = qs_threshold;
    params["reports_dir"] = reports_dir;
    params["annotations_dir"] = annotations_dir;
    std::vector<std::string> input_names;
    for (const fs::path& rp : report_files) input_names.push_back(rp.string());
    write_manifest(opts.out_dir, run_id, "evaluate", params, input_names,
                   {(fs::path(opts.out_dir) / "results.csv").string(),
                    (fs::path(opts.out_dir) / "summary.json").string(),
                    (fs::path(opts.out_dir) / "summary.csv").string()});
    return 0;
}

// ---- subsample ----

int cmd_subsample(const std::vector<std::string>& inputs, int n, double min_s, double max_s,
                  const CommonOpts& opts) {
    fs::create_directories(opts.out_dir);

    std::vector<std::string> outputs;
    ordered_json segments_meta = ordered_json::array();
    for (const auto& in : inputs) {
        const fs::path wav_path(in);
        const std::string stem = wav_path.stem().string();
        fs::path ann_path = wav_path;
        ann_path.replace_extension(".ann");
        if (!fs::exists(ann_path))
            pcg::fail(pcg::Errc::MissingPair, "no annotation beside '" + in + "'");

        const pcg::AudioBuffer buf = pcg::load_wav(wav_path);
        const pcg::AnnotationSet ann = pcg::parse_annotations(ann_path);

        // child seed from the basename, so adding inputs never reshuffles
        // the draws of existing ones
        const std::uint64_t child_seed = pcg::mix_seed(opts.seed, fnv1a64(stem));
        const auto segments = pcg::subsample(buf, ann, n, min_s, max_s, child_seed);

        for (size_t k = 0; k < segments.size(); ++k) {
            const std::string seg_stem = stem + "_seg" + std::to_string(k + 1);
            const fs::path wav_out = fs::path(opts.out_dir) / (seg_stem + ".wav");
            const fs::path ann_out = fs::path(opts.out_dir) / (seg_stem + ".ann");
            pcg::write_wav(segments[k].audio, wav_out);
            pcg::write_annotations(segments[k].annotations, ann_out);
            outputs.push_back(wav_out.string());
            outputs.push_back(ann_out.string());
            ordered_json sm;
            sm["source"] = in;
            sm["wav"] = wav_out.string();
            sm["ann"] = ann_out.string();
            sm["start_s"] = segments[k].start_s;
            sm["length_s"] = segments[k].length_s;
            segments_meta.push_back(std::move(sm));
        }
    }

    std::vector<std::string> id_parts = {"subsample", std::to_string(n), std::to_string(min_s),
                                         std::to_string(max_s), std::to_string(opts.seed)};
    for (const auto& in : inputs) id_parts.push_back(fs::path(in).stem().string());
    const std::string run_id = make_run_id(id_parts);

    ordered_json params;
    params["n"] = n;
    params["min_s"] = min_s;
    params["max_s"] = max_s;
    params["seed"] = opts.seed;
    params["segments"] = segments_meta;
    write_manifest(opts.out_dir, run_id, "subsample", params, inputs, outputs);
    return 0;
}

// ---- synth ----

double parse_snr(const std::string& s) {
    if (s == "inf" || s == "+inf" || s == "INF") return std::numeric_limits<double>::infinity();
    try {
        size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        pcg::fail(pcg::Errc::InvalidSpec, "bad SNR value '" + s + "'");
    }
}

struct SynthArgs {
    double hr = 100.0;
    double hr_end = -1.0;  // <0: constant profile
    double duration = 60.0;
    std::string snr = "20";
    std::string noise_color = "white";
    bool murmur = false;
    double jitter = 0.0;
    double sys_frac = 0.35;
    int rate = 4000;
    std::string id = "synth";
    int corpus_n = 0;  // >0 switches to corpus mode
    double hr_min = 50.0;
    double hr_max = 180.0;
    std::string snr_list;
};

int cmd_synth(const SynthArgs& args, const CommonOpts& opts) {
    pcg::SynthSpec spec;
    spec.duration_s = args.duration;
    spec.hr_profile = {{0.0, args.hr}};
    if (args.hr_end >= 0.0) spec.hr_profile = {{0.0, args.hr}, {args.duration, args.hr_end}};
    spec.systole_fraction = args.sys_frac;
    spec.snr_db = parse_snr(args.snr);
    spec.noise_color = args.noise_color == "pink" ? pcg::NoiseColor::Pink : pcg::NoiseColor::White;
    spec.murmur = args.murmur;
    spec.hr_jitter_pct = args.jitter;
    spec.sample_rate = args.rate;
    spec.seed = opts.seed;

    fs::create_directories(opts.out_dir);
    std::vector<std::string> outputs;

    auto write_pair = [&](const std::string& stem, const pcg::AudioBuffer& audio,
                          const pcg::AnnotationSet& ann) {
        const fs::path wav_out = fs::path(opts.out_dir) / (stem + ".wav");
        const fs::path ann_out = fs::path(opts.out_dir) / (stem + ".ann");
        pcg::write_wav(audio, wav_out);
        pcg::write_annotations(ann, ann_out);
        outputs.push_back(wav_out.string());
        outputs.push_back(ann_out.string());
    };

    ordered_json params;
    params["duration_s"] = args.duration;
    params["snr_db"] = args.snr;
    params["noise_color"] = args.noise_color;
    params["murmur"] = args.murmur;
    params["jitter_pct"] = args.jitter;
    params["systole_fraction"] = args.sys_frac;
    params["sample_rate"] = args.rate;
    params["seed"] = opts.seed;

    if (args.corpus_n > 0) {
        std::vector<double> snrs;
        if (!args.snr_list.empty()) {
            std::string item;
            std::istringstream ss(args.snr_list);
            while (std::getline(ss, item, ',')) snrs.push_back(parse_snr(item));
        }
        const auto corpus =
            pcg::synth_corpus(spec, args.corpus_n, args.hr_min, args.hr_max, snrs, opts.seed);
        ordered_json index = ordered_json::array();
        for (const auto& item : corpus) {
            write_pair(item.id, item.audio, item.annotations);
            ordered_json entry;
            entry["id"] = item.id;
            entry["hr_bpm"] = item.spec.hr_profile[0].bpm;
            entry["snr_db"] = std::isfinite(item.spec.snr_db)
                                  ? ordered_json(item.spec.snr_db)
                                  : ordered_json("inf");
            entry["murmur"] = item.spec.murmur;
            entry["seed"] = item.spec.seed;
            entry["wav"] = (fs::path(opts.out_dir) / (item.id + ".wav")).string();
            entry["ann"] = (fs::path(opts.out_dir) / (item.id + ".ann")).string();
            index.push_back(std::move(entry));
        }
        params["corpus_n"] = args.corpus_n;
        params["hr_range"] = {args.hr_min, args.hr_max};
        params["snr_list"] = args.snr_list;
        params["corpus"] = std::move(index);
    } else {
        spec.validate();
        const pcg::SynthRecording rec = pcg::synth_recording(spec);
        write_pair(args.id, rec.audio, rec.annotations);
        params["hr"] = args.hr;
        if (args.hr_end >= 0.0) params["hr_end"] = args.hr_end;
    }

    std::vector<std::string> id_parts = {"synth", std::to_string(opts.seed), params.dump()};
    const std::string run_id = make_run_id(id_parts);
    write_manifest(opts.out_dir, run_id, "synth", params, {}, outputs);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Canine phonocardiogram heart-rate analysis"};
    app.set_version_flag("--version", std::string("pcghr ") + kToolVersion);
    app.require_subcommand(1);

    CommonOpts opts;
    app.add_option("--config", opts.config_path, "Pipeline configuration file (key = value)");
    app.add_option("--seed", opts.seed, "Seed for randomized commands");
    app.add_option("--jobs", opts.jobs, "Worker threads for multi-file commands");
    app.add_option("--out", opts.out_dir, "Output directory");

    // analyze
    auto* a = app.add_subcommand("analyze", "Analyze WAV recordings into JSON reports");
    a->fallthrough();
    std::vector<std::string> a_inputs;
    std::string a_variant = "primary";
    a->add_option("inputs", a_inputs, "WAV files")->required();
    a->add_option("--variant", a_variant, "primary (60 s) or fast (30-40 s)")
        ->check(CLI::IsMember({"primary", "fast"}));

    // evaluate
    auto* e = app.add_subcommand("evaluate", "Score reports against annotations");
    e->fallthrough();
    std::string e_reports, e_annotations;
    double e_qs = 70.0;
    e->add_option("--reports", e_reports, "Directory of analysis reports")->required();
    e->add_option("--annotations", e_annotations, "Directory of .ann files")->required();
    e->add_option("--qs-threshold", e_qs, "Quality-score gate (default 70)");

    // subsample
    auto* s = app.add_subcommand("subsample", "Extract random short segments from recordings");
    s->fallthrough();
    std::vector<std::string> s_inputs;
    int s_n = 3;
    double s_min = 30.0, s_max = 40.0;
    s->add_option("inputs", s_inputs, "WAV files with sibling .ann annotations")->required();
    s->add_option("--n", s_n, "Segments per recording (default 3)");
    s->add_option("--min-s", s_min, "Minimum segment length (default 30)");
    s->add_option("--max-s", s_max, "Maximum segment length (default 40)");

    // synth
    auto* y = app.add_subcommand("synth", "Generate synthetic recordings with annotations");
    y->fallthrough();
    SynthArgs ya;
    y->add_option("--hr", ya.hr, "Heart rate in bpm (default 100)");
    y->add_option("--hr-end", ya.hr_end, "Ramp the HR profile to this bpm");
    y->add_option("--duration", ya.duration, "Length in seconds (default 60)");
    y->add_option("--snr", ya.snr, "SNR in dB, or 'inf' (default 20)");
    y->add_option("--noise-color", ya.noise_color, "white or pink")
        ->check(CLI::IsMember({"white", "pink"}));
    y->add_flag("--murmur", ya.murmur, "Add a systolic murmur");
    y->add_option("--jitter", ya.jitter, "Cycle jitter percent (default 0)");
    y->add_option("--sys-frac", ya.sys_frac, "Systole fraction of the cycle (default 0.35)");
    y->add_option("--rate", ya.rate, "Sample rate (default 4000)");
    y->add_option("--id", ya.id, "Output basename (default 'synth')");
    y->add_option("--n", ya.corpus_n, "Corpus mode: number of recordings");
    y->add_option("--hr-min", ya.hr_min, "Corpus HR range low (default 50)");
    y->add_option("--hr-max", ya.hr_max, "Corpus HR range high (default 180)");
    y->add_option("--snr-list", ya.snr_list, "Corpus SNR cycle, comma separated");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (a->parsed()) return cmd_analyze(a_inputs, a_variant, opts);
        if (e->parsed()) return cmd_evaluate(e_reports, e_annotations, e_qs, opts);
        if (s->parsed()) return cmd_subsample(s_inputs, s_n, s_min, s_max, opts);
        if (y->parsed()) return cmd_synth(ya, opts);
    } catch (const pcg::Error& err) {
        std::cerr << "pcghr: " << err.what() << "\n";
        return exit_code_for(err.code());
    } catch (const std::exception& err) {
        std::cerr << "pcghr: " << err.what() << "\n";
        return 2;
    }
    return 1;
}
