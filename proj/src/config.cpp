#include "int2int/config.hpp"

#include <algorithm>

#include "int2int/errors.hpp"

namespace int2int {

namespace {

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto end = comma == std::string::npos ? s.size() : comma;
        if (end > start) out.push_back(s.substr(start, end - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

void RunConfig::validate() const {
    require(epoch_size >= 1, "epoch_size must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(micro_batch_size >= -1, "micro_batch_size must be >= -1");
    require(accumulate_gradients >= 1, "accumulate_gradients must be >= 1");
    require(report_loss_every >= 1, "report_loss_every must be >= 1");
    require(max_epoch >= 0, "max_epoch must be >= 0");
    require(save_periodic >= 0, "save_periodic must be >= 0");
    require(clip_grad_norm >= 0.0, "clip_grad_norm must be >= 0");
    require(num_workers >= 1, "num_workers must be >= 1");
    require(precision == "double" || precision == "float", "precision must be double or float");
    require(!deterministic || env_base_seed >= 0, "deterministic mode needs env_base_seed >= 0");
    require(eval_size >= 0, "eval_size must be >= 0");
    require(batch_size_eval >= 1, "batch_size_eval must be >= 1");
    require(beam_size >= 1, "beam_size must be >= 1");
    require(max_output_len >= 3, "max_output_len must be >= 3");
    require(eval_verbose >= 0 && eval_verbose <= 2, "eval_verbose must be 0, 1 or 2");
    require(max_len == -1 || max_len >= 1, "max_len must be -1 or positive");
    require(reload_size >= 1, "reload_size must be >= 1");
    require(!(eval_only && reload_model.empty() && eval_from_exp.empty() && reload_checkpoint.empty()),
            "eval_only needs reload_model, reload_checkpoint or eval_from_exp");
    if (two_classes) {
        require(!batch_load, "two_classes cannot be combined with batch_load");
        require(first_class_size > 0, "two_classes needs first_class_size > 0");
        require(first_class_prob > 0.0 && first_class_prob < 1.0, "two_classes needs 0 < first_class_prob < 1");
    }
    const auto spec = task_spec();
    spec.validate();
    require(spec.operation != Operation::data || !train_data.empty() || eval_only || !eval_from_exp.empty(),
            "operation data needs --train_data");
    require(spec.operation != Operation::data || !eval_data.empty(), "operation data needs --eval_data");
    require(!(export_data && spec.operation == Operation::data), "export_data needs a generated task");
    const auto mc = model_config();
    mc.validate();
    if (mc.enc_positional != nn::Positional::none) {
        require(max_len < 0 || max_len + 2 <= max_positions, "max_len + 2 exceeds max_positions");
    }
    if (mc.architecture == nn::Architecture::encoder_decoder && mc.dec_positional != nn::Positional::none) {
        require(max_output_len - 1 <= max_positions, "max_output_len - 1 exceeds max_positions");
    }
    if (mc.architecture == nn::Architecture::encoder_only && spec.operation != Operation::data) {
        require(Task(spec).outputs_fit_in_inputs(), "encoder-only models need outputs no longer than inputs");
    }
    if (beam_search && beam_size > 1) {
        require(mc.architecture == nn::Architecture::encoder_decoder, "beam search needs an encoder-decoder model");
    }
    (void)optimizer_config();
}

nn::ModelConfig RunConfig::model_config() const {
    nn::ModelConfig m;
    if (architecture == "encoder_decoder") {
        m.architecture = nn::Architecture::encoder_decoder;
    } else if (architecture == "encoder_only") {
        m.architecture = nn::Architecture::encoder_only;
    } else {
        throw ConfigError("unknown architecture \"" + architecture + "\"");
    }
    m.n_enc_layers = static_cast<int>(n_enc_layers);
    m.n_dec_layers = static_cast<int>(n_dec_layers);
    m.enc_emb_dim = static_cast<int>(enc_emb_dim);
    m.dec_emb_dim = static_cast<int>(dec_emb_dim);
    m.n_enc_heads = static_cast<int>(n_enc_heads);
    m.n_dec_heads = static_cast<int>(n_dec_heads);
    m.n_enc_hidden_layers = static_cast<int>(n_enc_hidden_layers);
    m.n_dec_hidden_layers = static_cast<int>(n_dec_hidden_layers);
    m.activation = gelu_activation ? nn::Activation::gelu : nn::Activation::relu;
    m.dropout = dropout;
    m.attention_dropout = attention_dropout;
    const auto pos = sinusoidal_embeddings ? nn::Positional::sinusoidal : nn::Positional::learned;
    m.enc_positional = enc_has_pos_emb ? pos : nn::Positional::none;
    m.dec_positional = dec_has_pos_emb ? pos : nn::Positional::none;
    m.share_inout_emb = share_inout_emb;
    m.enc_loop_idx = static_cast<int>(enc_loop_idx);
    m.dec_loop_idx = static_cast<int>(dec_loop_idx);
    m.enc_loops = static_cast<int>(enc_loops);
    m.dec_loops = static_cast<int>(dec_loops);
    m.init = xav_init ? nn::InitScheme::xavier : nn::InitScheme::kaiming_uniform;
    m.max_positions = static_cast<int>(max_positions);
    return m;
}

TaskSpec RunConfig::task_spec() const {
    TaskSpec t;
    t.operation = parse_operation(operation);
    t.min_int = min_int;
    t.max_int = max_int;
    t.modulo = modulo;
    t.base = base;
    t.dim1 = static_cast<int>(dim1);
    t.dim2 = static_cast<int>(dim2);
    t.max_class = static_cast<int>(max_class);
    t.n_eval_metrics = static_cast<int>(n_eval_metrics);
    t.n_error_metrics = static_cast<int>(n_error_metrics);
    return t;
}

EvalConfig RunConfig::eval_config() const {
    EvalConfig e;
    e.batch_size = static_cast<std::size_t>(batch_size_eval);
    e.beam_search = beam_search;
    e.beam_size = static_cast<std::size_t>(beam_size);
    e.max_output_len = static_cast<std::size_t>(max_output_len);
    e.eval_verbose = static_cast<int>(eval_verbose);
    e.eval_verbose_print = eval_verbose_print;
    e.export_pred = export_pred;
    return e;
}

OptimizerConfig RunConfig::optimizer_config() const { return parse_optimizer(optimizer); }

std::vector<std::string> RunConfig::eval_paths() const { return split_commas(eval_data); }

std::int64_t RunConfig::reduction_chunk() const {
    if (micro_batch_size >= 0) return micro_batch_size;
    return deterministic ? kDeterministicChunk : 0;
}

std::vector<std::string> RunConfig::ignored_flags() const {
    const RunConfig d;
    std::vector<std::string> out;
    if (cpu != d.cpu) out.emplace_back("cpu");
    if (local_gpu != d.local_gpu) out.emplace_back("local_gpu");
    if (local_rank != d.local_rank) out.emplace_back("local_rank");
    if (fp16 != d.fp16) out.emplace_back("fp16");
    if (amp != d.amp) out.emplace_back("amp");
    return out;
}

void to_json(nlohmann::json& j, const RunConfig& c) {
    j = nlohmann::json::object();
#define INT2INT_FIELD_TO_JSON(type, name, def, help) j[#name] = c.name;
    INT2INT_RUN_CONFIG_FIELDS(INT2INT_FIELD_TO_JSON)
#undef INT2INT_FIELD_TO_JSON
}

void from_json(const nlohmann::json& j, RunConfig& c) {
    if (!j.is_object()) throw ConfigError("run configuration must be a JSON object");
    static const std::vector<std::string> known = {
#define INT2INT_FIELD_NAME(type, name, def, help) #name,
        INT2INT_RUN_CONFIG_FIELDS(INT2INT_FIELD_NAME)
#undef INT2INT_FIELD_NAME
    };
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown configuration key \"" + key + "\"");
        }
    }
    try {
#define INT2INT_FIELD_FROM_JSON(type, name, def, help) \
    if (j.contains(#name)) j.at(#name).get_to(c.name);
        INT2INT_RUN_CONFIG_FIELDS(INT2INT_FIELD_FROM_JSON)
#undef INT2INT_FIELD_FROM_JSON
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad configuration value: ") + e.what());
    }
}

const std::vector<std::pair<std::string, std::string>>& flag_aliases() {
    static const std::vector<std::pair<std::string, std::string>> aliases = {
        {"maxint", "max_int"},
        {"minint", "min_int"},
        {"modulus", "modulo"},
        {"max_epochs", "max_epoch"},
        {"base_env_seed", "env_base_seed"},
        {"n_enc_hidden_layer", "n_enc_hidden_layers"},
        {"n_dec_hidden_layer", "n_dec_hidden_layers"},
    };
    return aliases;
}

}  // namespace int2int
