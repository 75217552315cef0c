#include "repoclass/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace repoclass {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double to_double(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("expected a number, got '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ParseError("expected a non-negative integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ParseError("expected a boolean, got '" + s + "'");
}

std::vector<std::string> to_list(std::string s) {
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

template <class C>
std::vector<Field> fields(C& c) {
  auto size_field = [](const char* s, const char* k, std::size_t& ref) {
    return Field{s, k, [&ref](const std::string& v) { ref = to_u64(v); }, [&ref] { return std::to_string(ref); }};
  };
  auto double_field = [](const char* s, const char* k, double& ref) {
    return Field{s, k, [&ref](const std::string& v) { ref = to_double(v); }, [&ref] { return fmt_double(ref); }};
  };
  auto bool_field = [](const char* s, const char* k, bool& ref) {
    return Field{s, k, [&ref](const std::string& v) { ref = to_bool(v); },
                 [&ref] { return std::string(ref ? "true" : "false"); }};
  };
  auto string_field = [](const char* s, const char* k, std::string& ref) {
    return Field{s, k, [&ref](const std::string& v) { ref = v; }, [&ref] { return '"' + ref + '"'; }};
  };
  auto path_field = [](const char* s, const char* k, std::filesystem::path& ref) {
    return Field{s, k, [&ref](const std::string& v) { ref = v; }, [&ref] { return '"' + ref.string() + '"'; }};
  };

  std::vector<Field> f;
  f.push_back(path_field("paths", "corpus", c.corpus));
  f.push_back(path_field("paths", "hierarchy", c.hierarchy));
  f.push_back(path_field("paths", "workdir", c.workdir));
  f.push_back({"pipeline", "seed", [&c](const std::string& v) { c.set_seed(to_u64(v)); },
               [&c] { return std::to_string(c.seed); }});
  f.push_back(bool_field("pipeline", "deterministic", c.deterministic));

  f.push_back(bool_field("corpus", "remove_stopwords", c.tokenizer.remove_stopwords));
  f.push_back(size_field("corpus", "max_document_tokens", c.tokenizer.max_document_tokens));

  auto& e = c.embedding;
  f.push_back(size_field("embedding", "dimension", e.dimension));
  f.push_back({"embedding", "proportions",
               [&e](const std::string& v) {
                 auto items = to_list(v);
                 if (items.size() != e.proportions.size())
                   throw ParseError("proportions needs " + std::to_string(e.proportions.size()) + " values");
                 for (std::size_t i = 0; i < items.size(); ++i) e.proportions[i] = to_double(items[i]);
               },
               [&e] {
                 std::string s;
                 for (std::size_t i = 0; i < e.proportions.size(); ++i)
                   s += (i ? ", " : "") + fmt_double(e.proportions[i]);
                 return s;
               }});
  f.push_back(double_field("embedding", "samples_per_edge", e.samples_per_edge));
  f.push_back(size_field("embedding", "negatives", e.negatives));
  f.push_back(double_field("embedding", "learning_rate", e.lr_initial));
  f.push_back(double_field("embedding", "final_learning_rate", e.lr_final));
  f.push_back(size_field("embedding", "workers", e.workers));
  f.push_back(size_field("embedding", "checkpoints", e.checkpoints));
  f.push_back(size_field("embedding", "heldout_pairs", e.heldout_pairs));

  f.push_back(size_field("enrichment", "max_keywords", c.enrichment.max_keywords));
  f.push_back(size_field("enrichment", "min_document_frequency", c.enrichment.min_document_frequency));

  auto& g = c.generation;
  f.push_back(size_field("pseudogen", "docs_per_child", g.docs_per_child));
  f.push_back(double_field("pseudogen", "beta", g.beta));
  f.push_back(size_field("pseudogen", "tau", g.tau));
  f.push_back(double_field("pseudogen", "mean_length", g.mean_length));
  f.push_back(size_field("pseudogen", "max_length", g.max_length));

  auto& k = c.classifier;
  f.push_back({"classifier", "widths",
               [&k](const std::string& v) {
                 k.widths.clear();
                 for (const auto& item : to_list(v)) k.widths.push_back(to_u64(item));
               },
               [&k] {
                 std::string s;
                 for (std::size_t i = 0; i < k.widths.size(); ++i) s += (i ? ", " : "") + std::to_string(k.widths[i]);
                 return s;
               }});
  f.push_back(size_field("classifier", "filters", k.filters));
  f.push_back(size_field("classifier", "epochs", k.epochs));
  f.push_back(size_field("classifier", "batch_size", k.batch_size));
  f.push_back(double_field("classifier", "learning_rate", k.learning_rate));
  f.push_back(double_field("classifier", "beta1", k.beta1));
  f.push_back(double_field("classifier", "beta2", k.beta2));
  f.push_back(double_field("classifier", "epsilon", k.epsilon));
  f.push_back(size_field("classifier", "threads", k.threads));
  f.push_back(double_field("classifier", "stop_below", k.stop_below));

  f.push_back(double_field("evaluation", "fail_under", c.fail_under));

  f.push_back(double_field("fetch", "rpm", c.fetch_rpm));
  f.push_back(size_field("fetch", "concurrency", c.fetch_concurrency));
  f.push_back(string_field("fetch", "base_url", c.fetch_base_url));
  f.push_back(string_field("fetch", "token_env", c.fetch_token_env));
  return f;
}

constexpr const char* kSections[] = {"paths",     "pipeline",   "corpus",     "embedding", "enrichment",
                                     "pseudogen", "classifier", "evaluation", "fetch"};

}  // namespace

void PipelineConfig::set_seed(std::uint64_t s) {
  seed = s;
  embedding.seed = s;
  generation.seed = s;
  classifier.seed = s;
}

void PipelineConfig::make_deterministic() {
  deterministic = true;
  embedding.workers = 1;
  classifier.threads = 1;
}

void PipelineConfig::validate() const {
  embedding.validate();
  auto g = generation;
  if (g.mean_length <= 0.0) g.mean_length = 1.0;
  g.validate();
  classifier.validate();
  if (!(fail_under >= 0.0 && fail_under <= 1.0)) throw ValidationError("evaluation.fail_under must be in [0, 1]");
  if (enrichment.max_keywords < 1) throw ValidationError("enrichment.max_keywords must be >= 1");
}

PipelineConfig PipelineConfig::parse(std::string_view text) {
  PipelineConfig c;
  auto table = fields(c);
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto where = "config line " + std::to_string(line_no) + ": ";
    std::string line = raw;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (!quoted && (line[i] == '#' || line[i] == ';')) {
        line.erase(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where + "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      bool known = false;
      for (const char* s : kSections) known |= section == s;
      if (!known) throw ParseError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + "expected key = value");
    if (section.empty()) throw ParseError(where + "key outside any section");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = unquote(trim(std::string_view(line).substr(eq + 1)));
    auto it = std::find_if(table.begin(), table.end(),
                           [&](const Field& f) { return section == f.section && key == f.key; });
    if (it == table.end()) throw ParseError(where + "unknown key '" + key + "' in [" + section + "]");
    try {
      it->set(value);
    } catch (const ParseError& e) {
      throw ParseError(where + section + "." + key + ": " + e.what());
    }
  }
  if (c.deterministic) c.make_deterministic();
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  PipelineConfig c;
  try {
    c = parse(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  for (auto* p : {&c.corpus, &c.hierarchy, &c.workdir})
    if (!p->empty() && p->is_relative()) *p = base / *p;
  return c;
}

std::string PipelineConfig::section_text(std::string_view section) const {
  PipelineConfig copy = *this;
  std::string out;
  for (const auto& f : fields(copy))
    if (section == f.section) out += std::string(f.key) + " = " + f.get() + "\n";
  return out;
}

std::string PipelineConfig::to_text() const {
  std::string out;
  for (const char* s : kSections) {
    if (!out.empty()) out += "\n";
    out += "[" + std::string(s) + "]\n" + section_text(s);
  }
  return out;
}

}  // namespace repoclass
