#include "schemacoder/boosting.hpp"

#include "schemacoder/errors.hpp"
#include "schemacoder/util.hpp"

#include <algorithm>
#include <cstdio>

namespace schemacoder {

namespace {

constexpr LineId kContextPad = 2;

std::string extract_rule_document(const std::string& reply) {
    std::size_t start = reply.find('{');
    if (start == std::string::npos) return "";
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < reply.size(); ++i) {
        char c = reply[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            --depth;
            if (depth == 0) return reply.substr(start, i - start + 1);
        }
    }
    return "";
}

}  // namespace

ResidualSet compute_residual(const EvalReport& report, const LogFile& log) {
    ResidualSet residual;
    residual.lines.insert(report.unmatched_lines.begin(), report.unmatched_lines.end());
    residual.lines.insert(report.template_mismatch_lines.begin(),
                          report.template_mismatch_lines.end());
    residual.lines.insert(report.misgrouped_lines.begin(), report.misgrouped_lines.end());
    if (residual.lines.empty()) return residual;

    const LineId total = log.total_lines();
    struct Range {
        LineId first;
        LineId last;
    };
    std::vector<Range> padded;
    LineId run_start = 0;
    LineId run_end = 0;
    auto flush = [&] {
        if (run_start == 0) return;
        Range r;
        r.first = std::max<LineId>(1, run_start - kContextPad);
        r.last = std::min<LineId>(total, run_end + kContextPad);
        padded.push_back(r);
        run_start = 0;
    };
    for (LineId id : residual.lines) {
        if (run_start == 0) {
            run_start = run_end = id;
        } else if (id == run_end + 1) {
            run_end = id;
        } else {
            flush();
            run_start = run_end = id;
        }
    }
    flush();

    // Merge padded ranges that touch or overlap.
    std::vector<Range> merged;
    for (const Range& r : padded) {
        if (!merged.empty() && r.first <= merged.back().last + 1) {
            merged.back().last = std::max(merged.back().last, r.last);
        } else {
            merged.push_back(r);
        }
    }

    int next_id = 0;
    for (const Range& r : merged) {
        residual.residual_chunks.push_back(
            make_chunk(log, next_id++, r.first, r.last, std::size_t(-1)));
    }
    return residual;
}

ParserProgram fit_residual(LlmClient& llm, const ResidualSet& residual, const LogFile& log,
                           const std::string& background, const ResidualFitConfig& cfg,
                           TraceSink* trace, VersionCounter* versions) {
    if (residual.empty()) throw std::invalid_argument("fit_residual: residual must be non-empty");

    std::vector<EmbeddingVector> vectors = embed_chunks(residual.residual_chunks, cfg.embedding_dim);
    Clustering clustering = cluster(vectors, std::nullopt, cfg.seed);
    std::vector<int> representatives =
        sample_representatives(clustering, vectors, cfg.representatives_per_cluster, cfg.seed);

    std::vector<Chunk> selected;
    for (int chunk_id : representatives) {
        for (const auto& chunk : residual.residual_chunks) {
            if (chunk.id == chunk_id) {
                selected.push_back(chunk);
                break;
            }
        }
    }

    auto fixes_something = [&](const ParserProgram& fragment) {
        for (LineId id : residual.lines) {
            const std::string& content = log.content_of(id);
            for (const auto& rule : fragment.rules) {
                if (rule.compiled->matches(content)) return true;
            }
        }
        return false;
    };

    QTreeRun run = run_qtree(llm, selected, background, cfg.qtree, trace, versions);
    if (fixes_something(run.program)) return run.program;

    // One retry, then give up on this residual.
    run = run_qtree(llm, selected, background, cfg.qtree, trace, versions);
    if (fixes_something(run.program)) return run.program;
    throw DegenerateError("residual fragment matches no residual line");
}

IntegrateOutcome integrate(LlmClient& llm, const ParserProgram& base, const ParserProgram& fragment,
                           const GroundTruth& truth, const LogFile& log,
                           const std::string& background, int boost_iteration,
                           VersionCounter* versions) {
    EvalReport base_report = evaluate(execute(base, log), truth, log);
    const double base_loss = base_report.loss;

    auto score_of = [&](const ParserProgram& program) {
        return evaluate(execute(program, log), truth, log).loss;
    };
    auto stamp = [&](ParserProgram program) {
        program.version = versions ? versions->next() : std::max(base.version, fragment.version) + 1;
        program.lineage = base.lineage;
        program.lineage.push_back(LineageEntry{"boost", {base.version, fragment.version}});
        return program;
    };

    // LLM-mediated integration first.
    try {
        CompletionRequest request;
        request.purpose = PromptId::boost;
        request.temperature = 0.2;
        request.max_output_tokens = 8192;
        request.prompt = render_prompt(PromptId::boost, {{"background", background},
                                                         {"current", serialize(base)},
                                                         {"fragment", serialize(fragment)}});
        std::string reply = llm.complete(request);
        std::string payload = extract_rule_document(reply);
        if (!payload.empty()) {
            CompiledDocument doc = compile_program(payload, CompileOptions{.lenient = true});
            if (!doc.program.rules.empty()) {
                double loss = score_of(doc.program);
                if (loss <= base_loss) {
                    IntegrateOutcome outcome;
                    outcome.program = stamp(std::move(doc.program));
                    outcome.loss = loss;
                    return outcome;
                }
            }
        }
    } catch (const BackendError&) {
    } catch (const SchemaError&) {
    }

    // Deterministic fallback: fragment rules ahead of the base rules,
    // retrying with regressive patch rules removed until the gate holds.
    std::set<std::pair<std::string, std::string>> base_pairs;
    for (const auto& rule : base.rules) base_pairs.emplace(rule.match_pattern, rule.template_text);

    std::set<std::string> used_ids;
    for (const auto& rule : base.rules) used_ids.insert(rule.id);
    std::vector<TemplateRule> patch;
    for (const auto& rule : fragment.rules) {
        if (base_pairs.count({rule.match_pattern, rule.template_text})) continue;
        TemplateRule copy = rule;
        copy.provenance = Provenance{Provenance::Kind::boost_iteration, boost_iteration};
        while (!used_ids.insert(copy.id).second) copy.id += "_p";
        patch.push_back(std::move(copy));
    }

    std::set<LineId> base_correct;
    for (const auto& [id, tmpl] : truth.templates) {
        (void)tmpl;
        if (!base_report.misgrouped_lines.count(id) &&
            !base_report.template_mismatch_lines.count(id) && !base_report.unmatched_lines.count(id)) {
            base_correct.insert(id);
        }
    }

    while (!patch.empty()) {
        ParserProgram candidate;
        int priority = 0;
        for (const auto& rule : patch) {
            TemplateRule copy = rule;
            copy.priority = priority++;
            candidate.rules.push_back(std::move(copy));
        }
        for (const auto& rule : base.rules) {
            TemplateRule copy = rule;
            copy.priority = priority++;
            candidate.rules.push_back(std::move(copy));
        }
        candidate = finalize_program(std::move(candidate));

        ParseResult result = execute(candidate, log);
        EvalReport report = evaluate(result, truth, log);
        if (report.loss <= base_loss) {
            IntegrateOutcome outcome;
            outcome.program = stamp(std::move(candidate));
            outcome.loss = report.loss;
            outcome.used_fallback = true;
            return outcome;
        }

        // Remove patch rules that hijacked previously-correct lines.
        std::set<std::string> offenders;
        for (LineId id : base_correct) {
            bool now_wrong = report.misgrouped_lines.count(id) ||
                             report.template_mismatch_lines.count(id) ||
                             report.unmatched_lines.count(id);
            if (!now_wrong) continue;
            auto it = result.assignments.find(id);
            if (it != result.assignments.end()) offenders.insert(it->second.rule_id);
        }
        std::size_t before = patch.size();
        patch.erase(std::remove_if(patch.begin(), patch.end(),
                                   [&](const TemplateRule& rule) {
                                       return offenders.count(rule.id) > 0;
                                   }),
                    patch.end());
        if (patch.size() == before) break;  // nothing left to blame; give up
    }

    IntegrateOutcome outcome;
    outcome.program = base;
    outcome.loss = base_loss;
    outcome.used_fallback = true;
    outcome.no_op = true;
    return outcome;
}

RunResult run_schemacoder(LlmClient& llm, const LogFile& log, const GroundTruth& truth,
                          const std::string& background, const PipelineConfig& cfg,
                          TraceSink* trace_out) {
    bind_ground_truth(truth, log);

    RunResult result;
    TraceSink local_trace;
    TraceSink& trace = trace_out ? *trace_out : local_trace;
    VersionCounter versions(1);

    // Stage A: segment, embed, cluster, sample, question tree.
    std::vector<Chunk> chunks = segment(log, cfg.segment);
    ParserProgram f0;
    if (!chunks.empty()) {
        std::vector<EmbeddingVector> vectors = embed_chunks(chunks, cfg.embedding_dim);
        Clustering clustering = cluster(vectors, cfg.cluster_k, cfg.seed);
        std::vector<int> representatives = sample_representatives(
            clustering, vectors, cfg.representatives_per_cluster, cfg.seed);

        if (vectors.size() >= 2) {
            PcaResult pca = pca_project(vectors, 2);
            for (std::size_t i = 0; i < vectors.size(); ++i) {
                ChunkReportRow row;
                row.chunk_id = vectors[i].chunk_id;
                row.cluster = clustering.assignments.at(vectors[i].chunk_id);
                row.pc1 = pca.points[i][0];
                row.pc2 = pca.points[i][1];
                result.chunk_report.push_back(row);
            }
        }

        std::vector<Chunk> selected;
        for (int chunk_id : representatives) {
            for (const auto& chunk : chunks) {
                if (chunk.id == chunk_id) {
                    selected.push_back(chunk);
                    break;
                }
            }
        }
        QTreeRun qtree_run = run_qtree(llm, selected, background, cfg.qtree, &trace, &versions);
        f0 = std::move(qtree_run.program);
    }

    OptimizerConfig opt_cfg = cfg.optimizer;
    opt_cfg.seed = cfg.seed;
    Evolution evolution(llm, f0, truth, log, opt_cfg, background, &versions);

    Candidate best = evolution.global_best();
    result.initial_loss = best.report.loss;
    result.history.push_back(HistoryRow{0, "init", best.report.loss});

    ResidualFitConfig residual_cfg;
    residual_cfg.embedding_dim = cfg.embedding_dim;
    residual_cfg.representatives_per_cluster = cfg.residual_representatives;
    residual_cfg.qtree = cfg.qtree;
    residual_cfg.seed = cfg.seed;

    if (best.report.loss > 0.0) {
        for (int boost_iter = 1; boost_iter <= cfg.max_boost_iterations; ++boost_iter) {
            bool solved = false;
            for (int g = 0; g < cfg.boost_period; ++g) {
                evolution.step_generation();
                double loss = evolution.global_best().report.loss;
                result.history.push_back(HistoryRow{evolution.generation(), "optimize", loss});
                if (loss == 0.0) {
                    solved = true;
                    break;
                }
            }
            if (solved) break;

            best = evolution.global_best();
            ResidualSet residual = compute_residual(best.report, evolution.eval_log());
            if (residual.empty()) break;

            double boosted_loss = best.report.loss;
            try {
                ParserProgram fragment =
                    fit_residual(llm, residual, evolution.eval_log(), background, residual_cfg,
                                 &trace, &versions);
                IntegrateOutcome integrated =
                    integrate(llm, best.program, fragment, evolution.eval_truth(),
                              evolution.eval_log(), background, boost_iter, &versions);
                boosted_loss = integrated.loss;
                evolution.inject(integrated.program);
            } catch (const DegenerateError&) {
                // Fragment fixed nothing; the boost step is a no-op.
            } catch (const BackendError&) {
                // Stage-B backend trouble degrades to best-so-far.
            }
            ++result.boost_steps_run;
            result.history.push_back(
                HistoryRow{evolution.generation(), "boost", boosted_loss});
            if (boosted_loss == 0.0) break;
        }
    }

    // Final selection on the full log; never return something worse than
    // the initial program.
    Candidate final_best = evolution.global_best();
    ParseResult full_f0 = execute(f0, log);
    EvalReport f0_report = evaluate(full_f0, truth, log);
    ParseResult full_final = execute(final_best.program, log);
    EvalReport final_report = evaluate(full_final, truth, log);
    if (f0_report.loss < final_report.loss) {
        result.final_program = f0;
        result.full_report = f0_report;
    } else {
        result.final_program = final_best.program;
        result.full_report = final_report;
    }
    result.optimizer_progress = evolution.progress();
    result.trace = trace;
    return result;
}

std::string history_to_csv(const std::vector<HistoryRow>& history) {
    std::string out = "iteration,phase,loss\n";
    char buf[64];
    for (const auto& row : history) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%.6f\n", row.iteration, row.phase.c_str(), row.loss);
        out += buf;
    }
    return out;
}

std::string chunk_report_to_csv(const std::vector<ChunkReportRow>& rows) {
    std::string out = "chunk_id,cluster,pc1,pc2\n";
    char buf[128];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f\n", row.chunk_id, row.cluster, row.pc1,
                      row.pc2);
        out += buf;
    }
    return out;
}

std::string progress_to_csv(const std::vector<ProgressRow>& rows) {
    std::string out = "generation,island,best_score,loss\n";
    char buf[96];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f\n", row.generation, row.island,
                      row.best_score, row.loss);
        out += buf;
    }
    return out;
}

}  // namespace schemacoder
