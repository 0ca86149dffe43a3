#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sktod/backend.hpp"
#include "sktod/corpus.hpp"
#include "sktod/prompting.hpp"

namespace sktod {

enum class Mode { plain_completion, plain_chat, cot, cot_fewshot, waterfall };

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view s);  // also accepts "plain" for plain_completion

struct RunConfig {
    Mode mode = Mode::plain_completion;
    std::string responder_model = "gpt-3.5-turbo";
    std::string summariser_model = "text-davinci-003";  // waterfall step 1
    int max_tokens = kDefaultMaxTokens;
    int concurrency = 1;
    std::vector<FewShotExample> examples;  // cot_fewshot only

    void validate() const;
};

struct CotParse {
    std::string summary;
    std::optional<std::string> follow_up;
    std::string final;
};

// Recovers summary / follow-up / final from "(1) ... (2) ... (3) ..." output.
CotParse parse_cot_output(std::string_view text);

struct InstanceFailure {
    std::size_t id = 0;
    std::string message;
};

struct RunStats {
    std::size_t instances = 0;
    std::size_t seeking = 0;
    std::size_t requests = 0;
    std::size_t truncated_count = 0;
    std::size_t degraded_count = 0;  // waterfall fell back to raw knowledge
    std::vector<InstanceFailure> failures;
};

nlohmann::ordered_json to_json(const RunStats& s);

struct RunResult {
    std::vector<Prediction> predictions;
    RunStats stats;
};

// Knowledge to condition on for one instance: gold refs by default, or the
// entry of a selection file when one is given.
struct Selection {
    bool target = false;
    std::vector<KnowledgeRef> refs;
};

std::vector<Selection> selections_from_labels(const std::vector<DialogueInstance>& instances);
std::vector<Selection> selections_from_predictions(const std::vector<Prediction>& preds, std::size_t expected);

// The prompt(s) an instance would be sent, without calling any backend.
// For waterfall only the summarisation step can be rendered ahead of time.
std::vector<PromptBundle> preview_prompts(const DialogueInstance& inst, const std::vector<Snippet>& knowledge,
                                          const RunConfig& cfg);

struct WaterfallOutcome {
    std::string response;
    bool degraded = false;
    std::size_t requests = 0;
    std::size_t truncated = 0;
};

WaterfallOutcome run_waterfall(const DialogueInstance& inst, const std::vector<Snippet>& knowledge,
                               Backend& summariser, Backend& responder, const RunConfig& cfg);

// One prediction per instance, in instance order. Backend failures are caught
// per instance and reported in stats.failures.
RunResult run_generation(const std::vector<DialogueInstance>& instances, const KnowledgeBase& kb,
                         const std::vector<Selection>& selection, Backend& responder, Backend* summariser,
                         const RunConfig& cfg);

// Appends `mfq` to knowledge-seeking responses that carry no question.
std::vector<Prediction> postprocess_append_mfq(std::vector<Prediction> preds, std::string_view mfq);
// Drops trailing questions from knowledge-seeking responses.
std::vector<Prediction> postprocess_strip_questions(std::vector<Prediction> preds);

std::vector<Prediction> ingest_external_predictions(const std::filesystem::path& path);

}  // namespace sktod
