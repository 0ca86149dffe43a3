#include "sktod/cli.hpp"

#include <algorithm>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "sktod/analysis.hpp"
#include "sktod/augment.hpp"
#include "sktod/backend.hpp"
#include "sktod/config.hpp"
#include "sktod/corpus.hpp"
#include "sktod/metrics.hpp"
#include "sktod/pipeline.hpp"
#include "sktod/prompting.hpp"
#include "sktod/sentiment.hpp"

namespace sktod::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Paths {
    std::string knowledge, logs, labels, train_logs, train_labels, lexicon, traveler_types;
};

// Flag value when given, else the config entry, else empty.
std::optional<fs::path> pick(const std::string& flag, const std::optional<fs::path>& from_config) {
    if (!flag.empty()) return fs::path(flag);
    return from_config;
}

fs::path require(const std::string& flag, const std::optional<fs::path>& from_config, const char* what) {
    auto p = pick(flag, from_config);
    if (!p) throw ValidationError(std::string("missing --") + what + " (flag or config entry)");
    return *p;
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
    if (out_path.empty()) {
        out << text << "\n";
    } else {
        write_file(out_path, text + "\n");
    }
}

SentimentLexicon lexicon_for(const std::string& flag, const AppConfig& cfg) {
    if (auto p = pick(flag, cfg.lexicon)) return SentimentLexicon::load(*p);
    return SentimentLexicon::builtin();
}

std::vector<DialogueInstance> instances_from_labels(const fs::path& labels) {
    std::vector<DialogueInstance> out;
    auto ls = load_labels(labels);
    for (std::size_t i = 0; i < ls.size(); ++i) {
        DialogueInstance inst;
        inst.id = i;
        inst.label = std::move(ls[i]);
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<std::string> gold_responses(const std::vector<DialogueInstance>& instances) {
    std::vector<std::string> out;
    for (const auto& inst : instances)
        if (inst.label && inst.label->target) out.push_back(inst.label->response);
    return out;
}

std::shared_ptr<Backend> make_backend(const std::string& spec, const BackendSettings& settings,
                                      const std::string& record_from) {
    auto http = [&] { return std::make_shared<HttpBackend>(http_config(settings, api_key_from_env())); };
    if (spec == "mock") return std::make_shared<MockBackend>();
    if (spec == "http") return http();
    if (spec.starts_with("replay:")) return std::make_shared<ReplayBackend>(spec.substr(7));
    if (spec.starts_with("record:")) {
        std::shared_ptr<Backend> inner;
        if (record_from == "mock") inner = std::make_shared<MockBackend>();
        else if (record_from == "http") inner = http();
        else throw ValidationError("--record-from must be http or mock");
        return std::make_shared<RecordingBackend>(inner, spec.substr(7));
    }
    throw ValidationError("unknown backend \"" + spec + "\" (expected http, mock, replay:PATH or record:PATH)");
}

// --- subcommands ---------------------------------------------------------------------

struct AnalyzeArgs {
    Paths paths;
    std::string preds, csv_dir, out;
    std::size_t top_k = 100;
};

int cmd_analyze(const AnalyzeArgs& a, const AppConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto instances =
        load_dialogues(require(a.paths.logs, cfg.logs, "logs"), require(a.paths.labels, cfg.labels, "labels"));
    const auto lex = lexicon_for(a.paths.lexicon, cfg);
    const bool have_preds = !a.preds.empty();
    const auto preds = have_preds ? load_predictions(a.preds) : labels_as_predictions(instances);

    const auto responses = gold_responses(instances);
    const auto qs = question_stats(responses, a.top_k);
    const auto acts = per_act_report(instances, preds, lex);
    const auto corr = feature_correlations(instances, preds);

    ordered_json report;
    report["instances"] = instances.size();
    report["knowledge_seeking"] = responses.size();
    report["questions"] = to_json(qs);
    report["most_frequent_question"] =
        qs.top_k.empty() ? ordered_json(nullptr) : ordered_json{{"question", qs.top_k[0].first}, {"count", qs.top_k[0].second}};
    report["reference_lengths"] = to_json(length_stats(responses));
    if (have_preds) {
        std::vector<std::string> pr;
        for (const auto& p : preds)
            if (p.target) pr.push_back(p.response);
        report["prediction_lengths"] = to_json(length_stats(pr));
    }
    report["dialogue_acts"] = to_json(acts);
    report["correlations"] = to_json(corr);
    if (auto k = pick(a.paths.knowledge, cfg.knowledge)) {
        const auto kb = load_knowledge(*k);
        report["sentiment"] = to_json(sentiment_summary(instances, kb, lex));
    }
    if (!a.csv_dir.empty()) {
        fs::create_directories(a.csv_dir);
        write_file(fs::path(a.csv_dir) / "questions.csv", to_csv(qs));
        write_file(fs::path(a.csv_dir) / "dialogue_acts.csv", to_csv(acts));
        write_file(fs::path(a.csv_dir) / "correlations.csv", to_csv(corr));
        err << "wrote CSV tables to " << a.csv_dir << "\n";
    }
    emit(report.dump(2), a.out, out);
    return kExitOk;
}

struct EvalArgs {
    Paths paths;
    std::vector<std::string> preds, names;
    std::string out;
};

int cmd_eval(const EvalArgs& a, const AppConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto labels = require(a.paths.labels, cfg.labels, "labels");
    const auto logs = pick(a.paths.logs, std::nullopt);
    const auto instances = logs ? load_dialogues(*logs, labels) : instances_from_labels(labels);
    if (!a.names.empty() && a.names.size() != a.preds.size())
        throw ValidationError("--name must be given once per --preds");
    std::vector<MetricReport> reports;
    for (std::size_t i = 0; i < a.preds.size(); ++i) {
        auto r = evaluate_all(instances, load_predictions(a.preds[i]));
        r.system = a.names.empty() ? fs::path(a.preds[i]).stem().string() : a.names[i];
        reports.push_back(std::move(r));
    }
    if (reports.size() > 1) assign_mrr(reports);
    ordered_json j;
    j["systems"] = ordered_json::array();
    for (const auto& r : reports) j["systems"].push_back(to_json(r));
    err << format_report_table(reports);
    emit(j.dump(2), a.out, out);
    return kExitOk;
}

struct GenerateArgs {
    Paths paths;
    std::string mode = "plain", backend = "mock", record_from = "http", selection, out, model, summariser_model;
    int max_tokens = 0, concurrency = 0;
    bool dry_run = false;
};

int cmd_generate(const GenerateArgs& a, const AppConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto labels = pick(a.paths.labels, cfg.labels);
    const auto instances = load_dialogues(require(a.paths.logs, cfg.logs, "logs"), labels);
    const auto kb = load_knowledge(require(a.paths.knowledge, cfg.knowledge, "knowledge"));
    const auto selection = a.selection.empty()
                               ? selections_from_labels(instances)
                               : selections_from_predictions(load_predictions(a.selection), instances.size());

    RunConfig rc;
    rc.mode = parse_mode(a.mode);
    rc.max_tokens = a.max_tokens > 0 ? a.max_tokens : cfg.backend.max_tokens;
    rc.concurrency = a.concurrency > 0 ? a.concurrency : cfg.backend.concurrency;
    rc.responder_model = !a.model.empty()                         ? a.model
                         : rc.mode == Mode::plain_completion ? cfg.backend.completion_model
                                                             : cfg.backend.chat_model;
    rc.summariser_model = a.summariser_model.empty() ? cfg.backend.completion_model : a.summariser_model;
    if (rc.mode == Mode::cot_fewshot) {
        const auto train = load_dialogues(require(a.paths.train_logs, cfg.train_logs, "train-logs"),
                                          require(a.paths.train_labels, cfg.train_labels, "train-labels"));
        rc.examples = select_few_shot(train, lexicon_for(a.paths.lexicon, cfg), kb, 3);
        err << "few-shot examples: ";
        for (const auto& ex : rc.examples) err << ex.dialogue.id << " ";
        err << "\n";
    }
    rc.validate();

    if (a.dry_run) {
        ordered_json j = ordered_json::array();
        for (std::size_t i = 0; i < instances.size(); ++i) {
            if (!selection[i].target) continue;
            ordered_json prompts = ordered_json::array();
            for (const auto& b : preview_prompts(instances[i], resolve_refs(kb, selection[i].refs), rc))
                prompts.push_back(to_json(b));
            j.push_back({{"id", instances[i].id}, {"prompts", std::move(prompts)}});
        }
        emit(j.dump(2), a.out, out);
        return kExitOk;
    }

    auto backend = make_backend(a.backend, cfg.backend, a.record_from);
    const auto result = run_generation(instances, kb, selection, *backend, backend.get(), rc);
    emit(predictions_to_json(result.predictions).dump(2), a.out, out);

    const auto& st = result.stats;
    err << "mode " << to_string(rc.mode) << ", backend " << backend->name() << ": " << st.seeking
        << " knowledge-seeking instances, " << st.requests << " requests, " << st.truncated_count << " truncated, "
        << st.degraded_count << " degraded, " << st.failures.size() << " failed\n";
    for (const auto& f : st.failures) err << "  instance " << f.id << ": " << f.message << "\n";
    return st.failures.empty() ? kExitOk : kExitPartial;
}

struct PostprocessArgs {
    Paths paths;
    std::string preds, mfq, out;
    bool append_mfq = false, strip = false;
};

int cmd_postprocess(const PostprocessArgs& a, const AppConfig& cfg, std::ostream& out, std::ostream& err) {
    if (a.append_mfq == a.strip) throw ValidationError("choose exactly one of --append-mfq and --strip-questions");
    auto preds = ingest_external_predictions(a.preds);
    if (a.strip) {
        preds = postprocess_strip_questions(std::move(preds));
    } else {
        std::string mfq = a.mfq;
        if (mfq.empty()) {
            if (auto train = pick(a.paths.train_labels, cfg.train_labels)) {
                const auto [q, n] = most_frequent_question(gold_responses(instances_from_labels(*train)));
                mfq = q;
                err << "MFQ from training labels (" << n << " occurrences): " << mfq << "\n";
            } else {
                mfq = std::string(kMostFrequentQuestion);
                err << "MFQ (default): " << mfq << "\n";
            }
        }
        preds = postprocess_append_mfq(std::move(preds), mfq);
    }
    emit(predictions_to_json(preds).dump(2), a.out, out);
    return kExitOk;
}

struct AugmentArgs {
    Paths paths;
    std::string domains_file, backend = "mock", record_from = "http", model, out;
    std::vector<std::string> domains = {"hotel", "restaurant"};
    int per_entity_types = 5, sentences_per_review = 5, max_tokens = 1024;
    bool skip_existing = false;
};

int cmd_augment(const AugmentArgs& a, const AppConfig& cfg, std::ostream& out, std::ostream& err) {
    auto kb = load_knowledge(require(a.paths.knowledge, cfg.knowledge, "knowledge"));
    std::optional<TravelerTypeMap> types;
    if (auto p = pick(a.paths.traveler_types, cfg.traveler_types)) types = TravelerTypeMap::load(*p);
    auto backend = make_backend(a.backend, cfg.backend, a.record_from);
    const auto model = a.model.empty() ? cfg.backend.chat_model : a.model;

    AugmentReport report;
    if (!a.skip_existing) {
        AugmentOptions opts;
        opts.prompt = {a.per_entity_types, a.sentences_per_review, a.max_tokens};
        opts.model = model;
        opts.domains = a.domains;
        kb = augment_existing(kb, *backend, opts, types ? &*types : nullptr, report);
    }
    if (!a.domains_file.empty()) {
        const auto extra = parse_knowledge(read_json_file(a.domains_file));
        kb = augment_new_domains(kb, extra, *backend, model, types ? &*types : nullptr, report);
    }
    validate_knowledge(kb);
    emit(knowledge_to_json(kb).dump(2), a.out, out);
    err << to_json(report).dump(2) << "\n";
    return report.failures.empty() ? kExitOk : kExitPartial;
}

struct StatsArgs {
    Paths paths;
    std::string augmented, out;
};

int cmd_stats(const StatsArgs& a, const AppConfig& cfg, std::ostream& out, std::ostream&) {
    auto kb = load_knowledge(require(a.paths.knowledge, cfg.knowledge, "knowledge"));
    std::optional<TravelerTypeMap> types;
    if (auto p = pick(a.paths.traveler_types, cfg.traveler_types)) types = TravelerTypeMap::load(*p);
    const auto c = kb.counts();
    ordered_json j;
    j["knowledge"] = {{"entities", c.entities}, {"reviews", c.reviews}, {"sentences", c.sentences}, {"faqs", c.faqs}};
    if (!a.augmented.empty()) {
        auto aug = load_knowledge(a.augmented);
        if (types) {
            normalize_traveler_types(kb, *types);
            normalize_traveler_types(aug, *types);
        }
        j["augmentation"] = to_json(augmentation_stats(kb, aug));
    }
    emit(j.dump(2), a.out, out);
    return kExitOk;
}

void add_common(CLI::App* sub, Paths& p, std::initializer_list<const char*> which) {
    for (std::string_view w : which) {
        if (w == "knowledge") sub->add_option("--knowledge", p.knowledge, "Knowledge JSON file");
        if (w == "logs") sub->add_option("--logs", p.logs, "Dialogue logs JSON file");
        if (w == "labels") sub->add_option("--labels", p.labels, "Labels JSON file");
        if (w == "train") {
            sub->add_option("--train-logs", p.train_logs, "Training logs (few-shot pool)");
            sub->add_option("--train-labels", p.train_labels, "Training labels (few-shot pool, MFQ)");
        }
        if (w == "lexicon") sub->add_option("--lexicon", p.lexicon, "Sentiment lexicon TSV (token<TAB>valence)");
        if (w == "types") sub->add_option("--traveler-types", p.traveler_types, "Traveler-type alias map (JSON)");
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Subjective-knowledge task-oriented dialogue toolkit", "sktod"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)");

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "Response, question, act, length and sentiment statistics");
    add_common(analyze, an.paths, {"knowledge", "logs", "labels", "lexicon"});
    analyze->add_option("--preds", an.preds, "Predictions to analyse against the labels");
    analyze->add_option("--csv-dir", an.csv_dir, "Also write CSV tables here");
    analyze->add_option("--top-k", an.top_k, "Questions kept in the frequency table")->check(CLI::PositiveNumber);
    analyze->add_option("--out", an.out, "Write the JSON report here instead of stdout");

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Score predictions on detection, selection and generation");
    add_common(eval, ev.paths, {"logs", "labels"});
    eval->add_option("--preds", ev.preds, "Predictions file (repeat to rank several systems)")->required();
    eval->add_option("--name", ev.names, "System name per --preds");
    eval->add_option("--out", ev.out, "Write the JSON report here instead of stdout");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Generate responses with an LLM backend");
    add_common(generate, gen.paths, {"knowledge", "logs", "labels", "train", "lexicon"});
    generate->add_option("--mode", gen.mode, "plain | plain_chat | cot | cot_fewshot | waterfall");
    generate->add_option("--backend", gen.backend, "http | mock | replay:PATH | record:PATH");
    generate->add_option("--record-from", gen.record_from, "Backend behind record:PATH (http or mock)");
    generate->add_option("--selection-file", gen.selection, "Predictions file whose targets/knowledge to use");
    generate->add_option("--model", gen.model, "Responder model name");
    generate->add_option("--summariser-model", gen.summariser_model, "Waterfall summariser model name");
    generate->add_option("--max-tokens", gen.max_tokens, "Base max_tokens (doubled for CoT)");
    generate->add_option("--concurrency", gen.concurrency, "Instances generated in parallel");
    generate->add_flag("--dry-run", gen.dry_run, "Print prompts without calling a backend");
    generate->add_option("--out", gen.out, "Write predictions here instead of stdout");

    PostprocessArgs pp;
    auto* postprocess = app.add_subcommand("postprocess", "Append the MFQ to, or strip questions from, predictions");
    add_common(postprocess, pp.paths, {"train"});
    postprocess->add_option("--preds", pp.preds, "Predictions file")->required();
    postprocess->add_flag("--append-mfq", pp.append_mfq, "Append the most frequent question where none is asked");
    postprocess->add_flag("--strip-questions", pp.strip, "Remove trailing questions");
    postprocess->add_option("--mfq", pp.mfq, "Question to append (default: from --train-labels)");
    postprocess->add_option("--out", pp.out, "Write predictions here instead of stdout");

    AugmentArgs au;
    auto* augment = app.add_subcommand("augment", "Generate synthetic reviews and merge them into the knowledge");
    add_common(augment, au.paths, {"knowledge", "types"});
    augment->add_option("--per-entity-types", au.per_entity_types, "Traveler types requested per entity");
    augment->add_option("--sentences-per-review", au.sentences_per_review, "Sentences requested per review");
    augment->add_option("--domains", au.domains, "Domains whose entities get new reviews");
    augment->add_option("--domains-file", au.domains_file, "Entities (name + FAQs) of new domains");
    augment->add_flag("--skip-existing", au.skip_existing, "Only process --domains-file");
    augment->add_option("--backend", au.backend, "http | mock | replay:PATH | record:PATH");
    augment->add_option("--record-from", au.record_from, "Backend behind record:PATH (http or mock)");
    augment->add_option("--model", au.model, "Model name");
    augment->add_option("--max-tokens", au.max_tokens, "max_tokens per request");
    augment->add_option("--out", au.out, "Write the merged knowledge here instead of stdout");

    StatsArgs st;
    auto* stats = app.add_subcommand("stats", "Knowledge counts and augmentation statistics");
    add_common(stats, st.paths, {"knowledge", "types"});
    stats->add_option("--augmented", st.augmented, "Augmented knowledge to compare against --knowledge");
    stats->add_option("--out", st.out, "Write JSON here instead of stdout");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) return kExitOk;
        err << app.help();
        return kExitError;
    }

    try {
        const AppConfig cfg = config_path.empty() ? AppConfig{} : AppConfig::load(config_path);
        if (*analyze) return cmd_analyze(an, cfg, out, err);
        if (*eval) return cmd_eval(ev, cfg, out, err);
        if (*generate) return cmd_generate(gen, cfg, out, err);
        if (*postprocess) return cmd_postprocess(pp, cfg, out, err);
        if (*augment) return cmd_augment(au, cfg, out, err);
        if (*stats) return cmd_stats(st, cfg, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

}  // namespace sktod::cli
