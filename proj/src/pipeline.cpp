#include "repoclass/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "repoclass/classifier.hpp"
#include "repoclass/corpus.hpp"
#include "repoclass/embedding.hpp"
#include "repoclass/enrichment.hpp"
#include "repoclass/hin.hpp"
#include "repoclass/pseudogen.hpp"
#include "repoclass/topics.hpp"

namespace repoclass {

namespace {

using ojson = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << text;
}

// vocab.tsv: token, document frequency, corpus frequency.
void write_vocab(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << "token\tdf\tcf\n";
  for (TokenId t = 0; t < vocab.size(); ++t)
    out << vocab.token(t) << '\t' << vocab.document_frequency(t) << '\t' << vocab.corpus_frequency(t) << '\n';
}

Vocabulary read_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> tokens;
  std::vector<std::size_t> df, cf;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tok;
    std::size_t d = 0, c = 0;
    if (!(ss >> tok >> d >> c)) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad row");
    tokens.push_back(std::move(tok));
    df.push_back(d);
    cf.push_back(c);
  }
  Vocabulary vocab(std::move(tokens));
  vocab.set_frequencies(std::move(df), std::move(cf));
  return vocab;
}

WordSpace read_space(const std::filesystem::path& path) {
  auto vectors = load_word_vectors(path);
  if (vectors.empty()) throw ValidationError(path.string() + ": no word vectors");
  const std::size_t dim = vectors.begin()->second.size();
  std::vector<std::pair<std::string, std::vector<double>>> rows(vectors.begin(), vectors.end());
  return WordSpace(dim, std::move(rows));
}

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::BuildHin: return "build-hin";
    case Stage::Embed: return "embed";
    case Stage::Enrich: return "enrich";
    case Stage::FitTopics: return "fit-topics";
    case Stage::Generate: return "generate";
    case Stage::Train: return "train";
    case Stage::Predict: return "predict";
    case Stage::Evaluate: return "evaluate";
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (auto s : kStages)
    if (stage_name(s) == name) return s;
  return std::nullopt;
}

std::string_view stage_artifact(Stage stage) {
  switch (stage) {
    case Stage::BuildHin: return "edges.tsv";
    case Stage::Embed: return "words.txt";
    case Stage::Enrich: return "keywords.json";
    case Stage::FitTopics: return "topics.json";
    case Stage::Generate: return "pseudo.jsonl";
    case Stage::Train: return "model.bin";
    case Stage::Predict: return "predictions.jsonl";
    case Stage::Evaluate: return "report.json";
  }
  return "?";
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t hash_file(const std::filesystem::path& path) { return fnv1a(read_file(path)); }

Pipeline::Pipeline(PipelineConfig config, RunOptions options)
    : config_(std::move(config)), options_(options) {
  config_.validate();
  if (config_.corpus.empty()) throw ValidationError("config: paths.corpus is not set");
  if (config_.hierarchy.empty()) throw ValidationError("config: paths.hierarchy is not set");
  std::filesystem::create_directories(config_.workdir);
}

std::string Pipeline::config_hash(Stage stage) const {
  // Settings each stage adds on top of its upstream stages.
  static const std::map<Stage, std::vector<std::string_view>> own = {
      {Stage::BuildHin, {"corpus"}},  {Stage::Embed, {"embedding"}}, {Stage::Enrich, {"enrichment"}},
      {Stage::FitTopics, {}},         {Stage::Generate, {"pseudogen"}}, {Stage::Train, {"classifier"}},
      {Stage::Predict, {}},           {Stage::Evaluate, {}}};
  std::uint64_t h = fnv1a(read_file(config_.corpus));
  h = fnv1a(read_file(config_.hierarchy), h);
  h = fnv1a("seed=" + std::to_string(config_.seed), h);
  for (auto s : kStages) {
    for (auto section : own.at(s)) h = fnv1a(config_.section_text(section), h);
    if (s == stage) break;
  }
  return hash_hex(h);
}

void Pipeline::require(Stage self, Stage prerequisite) const {
  const auto meta = path(std::string(stage_artifact(prerequisite)) + ".meta.json");
  if (!std::filesystem::exists(meta) || !std::filesystem::exists(path(stage_artifact(prerequisite)))) {
    throw DependencyError("'" + std::string(stage_name(self)) + "' needs the output of '" +
                          std::string(stage_name(prerequisite)) + "'; run that subcommand first");
  }
  std::string recorded;
  try {
    recorded = nlohmann::json::parse(read_file(meta)).at("config_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta.string() + ": " + e.what());
  }
  const auto expected = config_hash(prerequisite);
  if (recorded == expected) return;
  if (options_.force) {
    spdlog::warn("{}: produced under config {} (current {}); continuing because of --force",
                 stage_artifact(prerequisite), recorded, expected);
    return;
  }
  throw ValidationError(std::string(stage_artifact(prerequisite)) + " was produced under a different config (" +
                        recorded + " != " + expected + "); rerun '" + std::string(stage_name(prerequisite)) +
                        "' or pass --force");
}

void Pipeline::finish(Stage stage, const std::vector<std::string>& outputs,
                      const std::map<std::string, std::string>& inputs, double wall_ms) const {
  const auto hash = config_hash(stage);
  ojson meta{{"stage", stage_name(stage)}, {"config_hash", hash}, {"seed", config_.seed}, {"artifacts", outputs}};
  write_file(path(std::string(stage_artifact(stage)) + ".meta.json"), meta.dump(2) + "\n");

  ojson line{{"stage", stage_name(stage)},
             {"config_hash", hash},
             {"seed", config_.seed},
             {"inputs", inputs},
             {"outputs", outputs},
             {"wall_ms", std::llround(wall_ms)}};
  std::ofstream out(path("manifest.jsonl"), std::ios::app);
  out << line.dump() << '\n';
  spdlog::info("{}: done in {:.1f} s", stage_name(stage), wall_ms / 1000.0);
}

void Pipeline::run(Stage stage) {
  switch (stage) {
    case Stage::BuildHin: return build_hin();
    case Stage::Embed: return embed();
    case Stage::Enrich: return enrich();
    case Stage::FitTopics: return fit_topics();
    case Stage::Generate: return generate();
    case Stage::Train: return train();
    case Stage::Predict: return predict();
    case Stage::Evaluate: evaluate(); return;
  }
}

EvalReport Pipeline::run_all() {
  for (auto s : kStages)
    if (s != Stage::Evaluate) run(s);
  return evaluate();
}

void Pipeline::build_hin() {
  const auto start = Clock::now();
  const auto records = load_corpus(config_.corpus);
  const auto hierarchy = LabelHierarchy::load(config_.hierarchy);
  validate_gold_labels(records, hierarchy);
  const auto vocab = build_vocabulary(records, hierarchy, config_.tokenizer);
  const auto docs = build_documents(records, vocab, config_.tokenizer);
  const auto graph = HinGraph::build(records, docs, vocab, hierarchy);

  std::size_t tokens = 0;
  for (const auto& d : docs) tokens += d.tokens.size();
  if (tokens == 0) throw ValidationError("corpus has no document tokens");
  write_vocab(path("vocab.tsv"), vocab);
  graph.write_tsv(path("edges.tsv"));
  ojson stats{{"documents", docs.size()},
              {"tokens", tokens},
              {"mean_length", double(tokens) / double(docs.size())},
              {"vocabulary", vocab.size()},
              {"nodes", graph.node_count()},
              {"edges", graph.edge_count()}};
  write_file(path("stats.json"), stats.dump(2) + "\n");
  spdlog::info("build-hin: {} records, {} words, {} nodes, {} edges", records.size(), vocab.size(),
               graph.node_count(), graph.edge_count());
  finish(Stage::BuildHin, {"vocab.tsv", "edges.tsv", "stats.json"},
         {{"corpus", hash_hex(hash_file(config_.corpus))}, {"hierarchy", hash_hex(hash_file(config_.hierarchy))}},
         elapsed_ms(start));
}

void Pipeline::embed() {
  require(Stage::Embed, Stage::BuildHin);
  const auto start = Clock::now();
  const auto vocab = read_vocab(path("vocab.tsv"));
  const auto edges = HinGraph::read_tsv(path("edges.tsv"));
  const auto graph = HinGraph::from_edges(vocab.tokens(), edges);
  auto result = train_embeddings(graph, config_.embedding);
  std::string trace;
  for (auto l : result.heldout_loss) trace += fmt::format(" {:.4f}", l);
  spdlog::info("embed: {} samples, held-out loss{}", result.total_samples, trace);
  normalize_words(result.table, graph);
  save_embeddings(path("embeddings.txt"), result.table, graph, false);
  save_embeddings(path("words.txt"), result.table, graph, true);
  finish(Stage::Embed, {"embeddings.txt", "words.txt"}, {{"edges.tsv", hash_hex(hash_file(path("edges.tsv")))}},
         elapsed_ms(start));
}

void Pipeline::enrich() {
  require(Stage::Enrich, Stage::BuildHin);
  require(Stage::Enrich, Stage::Embed);
  const auto start = Clock::now();
  const auto hierarchy = LabelHierarchy::load(config_.hierarchy);
  const auto vocab = read_vocab(path("vocab.tsv"));
  const auto space = read_space(path("words.txt"));
  KeywordSets sets;
  std::vector<std::string> seeds;
  for (auto leaf : hierarchy.leaves()) {
    sets.leaf_ids.push_back(hierarchy.node(leaf).id);
    seeds.push_back(hierarchy.node(leaf).keyword);
  }
  const auto pool = candidate_pool(vocab, space, config_.enrichment);
  auto result = keyword_enrich(seeds, space, pool, config_.enrichment.max_keywords);
  sets.keywords = std::move(result.keywords);
  spdlog::info("enrich: {} rounds, {} keywords per class", result.rounds, sets.keywords.front().size());
  write_file(path("keywords.json"), sets.to_json() + "\n");
  write_file(path("keywords.txt"), sets.to_table());
  finish(Stage::Enrich, {"keywords.json", "keywords.txt"}, {{"words.txt", hash_hex(hash_file(path("words.txt")))}},
         elapsed_ms(start));
}

void Pipeline::fit_topics() {
  require(Stage::FitTopics, Stage::Enrich);
  const auto start = Clock::now();
  const auto hierarchy = LabelHierarchy::load(config_.hierarchy);
  const auto space = read_space(path("words.txt"));
  const auto sets = KeywordSets::load(path("keywords.json"));
  const auto model = repoclass::fit_topics(hierarchy, sets, space);
  write_file(path("topics.json"), model.to_json() + "\n");
  finish(Stage::FitTopics, {"topics.json"}, {{"keywords.json", hash_hex(hash_file(path("keywords.json")))}},
         elapsed_ms(start));
}

void Pipeline::generate() {
  require(Stage::Generate, Stage::BuildHin);
  require(Stage::Generate, Stage::FitTopics);
  const auto start = Clock::now();
  const auto hierarchy = LabelHierarchy::load(config_.hierarchy);
  const auto vocab = read_vocab(path("vocab.tsv"));
  const auto topics = TopicModel::load(path("topics.json"));
  // Pseudo documents draw only from words that occur in real documents.
  const auto space = read_space(path("words.txt")).filter([&](const std::string& t) {
    auto id = vocab.find(t);
    return id && vocab.corpus_frequency(*id) > 0;
  });
  std::vector<double> background(space.size());
  double total = 0.0;
  for (std::size_t r = 0; r < space.size(); ++r) {
    background[r] = double(vocab.corpus_frequency(vocab.id(space.token(r))));
    total += background[r];
  }
  for (auto& b : background) b /= total;

  GenConfig gen = config_.generation;
  if (gen.mean_length <= 0.0)
    gen.mean_length = nlohmann::json::parse(read_file(path("stats.json"))).at("mean_length").get<double>();
  PseudoGenerator generator(space, std::move(background), gen);
  std::vector<PseudoDocument> docs;
  for (auto node : hierarchy.internal_nodes()) {
    const auto& id = hierarchy.node(node).id;
    auto part = generator.generate_node_parallel(id, topics.of(id));
    docs.insert(docs.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  save_pseudo_documents(path("pseudo.jsonl"), docs, space);
  spdlog::info("generate: {} pseudo documents (mean length {:.1f})", docs.size(), gen.mean_length);
  finish(Stage::Generate, {"pseudo.jsonl"}, {{"topics.json", hash_hex(hash_file(path("topics.json")))}},
         elapsed_ms(start));
}

void Pipeline::train() {
  require(Stage::Train, Stage::Generate);
  const auto start = Clock::now();
  const auto hierarchy = LabelHierarchy::load(config_.hierarchy);
  const auto vocab = read_vocab(path("vocab.tsv"));
  const auto space = read_space(path("words.txt"));
  const auto pseudo = load_pseudo_documents(path("pseudo.jsonl"));

  HierarchicalModel model(hierarchy, vocab.tokens());
  const auto internal = hierarchy.internal_nodes();
  std::map<std::string, std::vector<TrainingExample>> examples;
  for (const auto& rec : pseudo) examples[rec.class_id].push_back({model.encode(rec.tokens), rec.label});

  std::vector<LocalClassifier> trained(internal.size());
  std::vector<TrainStats> stats(internal.size());
  std::vector<std::string> errors(internal.size());
  // Nodes are independent; each has its own RNG stream, so the result does
  // not depend on scheduling.
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < internal.size(); ++i) {
    const auto& node = hierarchy.node(internal[i]);
    try {
      auto it = examples.find(node.id);
      if (it == examples.end()) throw ValidationError("no pseudo documents for node '" + node.id + "'");
      trained[i] = LocalClassifier::initialise(node.id, node.children.size(), vocab.tokens(), space, config_.classifier);
      stats[i] = trained[i].train(it->second, config_.classifier);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < internal.size(); ++i) {
    if (!errors[i].empty()) throw NumericError("train: " + errors[i]);
    std::string trace;
    for (auto l : stats[i].epoch_loss) trace += fmt::format(" {:.4f}", l);
    spdlog::info("train: node {} loss{}", hierarchy.node(internal[i]).id, trace);
    model.set(std::move(trained[i]));
  }
  model.save(path("model.bin"));
  finish(Stage::Train, {"model.bin"}, {{"pseudo.jsonl", hash_hex(hash_file(path("pseudo.jsonl")))}},
         elapsed_ms(start));
}

void Pipeline::predict() {
  require(Stage::Predict, Stage::Train);
  const auto start = Clock::now();
  const auto records = load_corpus(config_.corpus);
  const auto model = HierarchicalModel::load(path("model.bin"));
  std::vector<std::vector<PathStep>> paths(records.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < records.size(); ++i)
    paths[i] = model.predict_path(document_tokens(records[i], config_.tokenizer), config_.classifier.stop_below);

  std::ofstream out(path("predictions.jsonl"));
  if (!out) throw ParseError("cannot write " + path("predictions.jsonl").string());
  for (std::size_t i = 0; i < records.size(); ++i) {
    ojson labels = ojson::array(), conf = ojson::array();
    for (const auto& step : paths[i]) {
      labels.push_back(step.label);
      conf.push_back(step.confidence);
    }
    out << ojson{{"id", records[i].id}, {"labels", labels}, {"confidence", conf}}.dump() << '\n';
  }
  out.close();
  finish(Stage::Predict, {"predictions.jsonl"}, {{"model.bin", hash_hex(hash_file(path("model.bin")))}},
         elapsed_ms(start));
}

EvalReport Pipeline::evaluate() {
  require(Stage::Evaluate, Stage::Predict);
  const auto start = Clock::now();
  const auto hierarchy = LabelHierarchy::load(config_.hierarchy);
  const auto records = load_corpus(config_.corpus);
  PathMap gold, predicted, all;
  for (const auto& r : records)
    if (r.gold_labels) gold[r.id] = *r.gold_labels;
  if (gold.empty()) throw ValidationError("evaluate: the corpus has no gold labels");

  std::ifstream in(path("predictions.jsonl"));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      auto j = nlohmann::json::parse(line);
      all[j.at("id").get<std::string>()] = j.at("labels").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("predictions.jsonl:" + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (const auto& [id, labels] : gold) {
    auto it = all.find(id);
    if (it == all.end()) throw ValidationError("evaluate: no prediction for repo '" + id + "'");
    predicted[id] = it->second;
  }
  auto report = f1_report(gold, predicted, hierarchy);
  write_file(path("report.json"), report.to_json());
  write_file(path("report.txt"), report.to_table());
  for (const auto& s : report.scopes)
    spdlog::info("evaluate: {} micro-F1 {:.4f} macro-F1 {:.4f}", s.name, s.micro_f1, s.macro_f1);
  finish(Stage::Evaluate, {"report.json", "report.txt"},
         {{"predictions.jsonl", hash_hex(hash_file(path("predictions.jsonl")))}}, elapsed_ms(start));
  return report;
}

}  // namespace repoclass
