#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "graphda/errors.hpp"
#include "graphda/graph.hpp"
#include "testutil.hpp"

using namespace graphda;

namespace {

std::filesystem::path write_temp(const std::string& name,
                                 const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream os(path);
  os << content;
  return path;
}

std::vector<std::string> tokens(const char* prefix, std::size_t count,
                                std::size_t start = 0) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(prefix + std::to_string(start + i));
  return out;
}

}  // namespace

TEST_CASE("align_attributes basic union") {
  auto v = align_attributes({"a", "b"}, {"b", "c"});
  CHECK(v.union_names == std::vector<std::string>{"a", "b", "c"});
  CHECK(v.source_index_map == std::vector<std::size_t>{0, 1});
  CHECK(v.target_index_map == std::vector<std::size_t>{1, 2});
}

TEST_CASE("align_attributes identical vocabularies") {
  auto v = align_attributes({"a"}, {"a"});
  CHECK(v.union_names == std::vector<std::string>{"a"});
  CHECK(common_attribute_rate(v) == 1.0);
}

TEST_CASE("align_attributes rejects duplicates") {
  CHECK_THROWS_AS(align_attributes({"a", "a"}, {"b"}), ValidationError);
  CHECK_THROWS_AS(align_attributes({"a"}, {"b", "b"}), ValidationError);
}

TEST_CASE("common attribute rates of the published dataset pairs") {
  // Citationv1 -> ACMv9: |source|=5379, |target|=5571, 4285 shared tokens,
  // union 6665, rate 64.29%.
  {
    auto source = tokens("s", 5379);
    auto target = tokens("s", 4285);  // shared block
    auto extra = tokens("t", 5571 - 4285);
    target.insert(target.end(), extra.begin(), extra.end());
    auto v = align_attributes(source, target);
    CHECK(v.union_names.size() == 6665);
    CHECK(common_attribute_rate(v) == doctest::Approx(0.6429).epsilon(5e-4));
  }
  // Blog1/Blog2: 4121 and 4158 attributes, 4094 shared, union 4185 -> 97.83%.
  {
    auto source = tokens("s", 4121);
    auto target = tokens("s", 4094);
    auto extra = tokens("t", 4158 - 4094);
    target.insert(target.end(), extra.begin(), extra.end());
    auto v = align_attributes(source, target);
    CHECK(v.union_names.size() == 4185);
    CHECK(common_attribute_rate(v) == doctest::Approx(0.9783).epsilon(5e-4));
  }
}

TEST_CASE("disjoint and identical vocabularies bound the rate") {
  CHECK(common_attribute_rate(align_attributes({"a", "b"}, {"c"})) == 0.0);
  CHECK(common_attribute_rate(align_attributes({"a", "b"}, {"b", "a"})) == 1.0);
}

TEST_CASE("rate is invariant to input list order") {
  std::mt19937_64 rng(3);
  auto source = tokens("s", 40);
  auto target = tokens("s", 25);
  auto extra = tokens("t", 10);
  target.insert(target.end(), extra.begin(), extra.end());
  const double reference =
      common_attribute_rate(align_attributes(source, target));
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(source.begin(), source.end(), rng);
    std::shuffle(target.begin(), target.end(), rng);
    CHECK(common_attribute_rate(align_attributes(source, target)) ==
          reference);
  }
}

TEST_CASE("load_graph parses, symmetrizes, and deduplicates") {
  auto vocab = align_attributes({"x0", "x1"}, {"x0"});
  auto edges = write_temp("g_edges.txt", "# comment\n0 1\n1 0\n");
  auto attrs = write_temp("g_attrs.txt", "0 x0 1.0\n1 x1 0.5\n");
  auto labels = write_temp("g_labels.txt", "0 0\n1 1\n");
  Graph g = load_graph(edges, attrs, labels, vocab, GraphSide::source, 2, 2);
  CHECK(g.neighbors(0) == std::vector<int>{1});
  CHECK(g.neighbors(1) == std::vector<int>{0});
  CHECK(g.attributes(0, 0) == 1.0);
  CHECK(g.attributes(1, 1) == 0.5);
  CHECK(g.labeled_set.size() == 2);  // source side: every node
}

TEST_CASE("empty edge file yields isolated nodes") {
  auto vocab = align_attributes({"x0"}, {"x0"});
  auto edges = write_temp("g2_edges.txt", "# none\n");
  auto attrs = write_temp("g2_attrs.txt", "0 x0 1\n1 x0 1\n2 x0 1\n");
  auto labels = write_temp("g2_labels.txt", "0 0\n1 0\n2 0\n");
  Graph g = load_graph(edges, attrs, labels, vocab, GraphSide::target, 3, 1);
  for (int v = 0; v < 3; ++v) CHECK(g.degree(v) == 0);
  CHECK(g.labeled_set.empty());  // target side: masked until selection
  CHECK(g.unlabeled_set.size() == 3);
}

TEST_CASE("loader errors name the file and line") {
  auto vocab = align_attributes({"x0"}, {"x0"});
  auto attrs = write_temp("g3_attrs.txt", "0 x0 1\n");
  auto labels = write_temp("g3_labels.txt", "0 0\n");
  {
    auto bad = write_temp("g3_edges.txt", "0 7\n");
    CHECK_THROWS_WITH_AS(
        load_graph(bad, attrs, labels, vocab, GraphSide::source, 2, 1),
        doctest::Contains("g3_edges.txt:1"), ValidationError);
  }
  {
    auto bad = write_temp("g3b_edges.txt", "0 zebra\n");
    CHECK_THROWS_AS(
        load_graph(bad, attrs, labels, vocab, GraphSide::source, 2, 1),
        ValidationError);
  }
  {
    auto edges = write_temp("g3c_edges.txt", "0 1\n");
    auto bad_labels = write_temp("g3c_labels.txt", "0 5\n");
    CHECK_THROWS_WITH_AS(
        load_graph(edges, attrs, bad_labels, vocab, GraphSide::source, 2, 1),
        doctest::Contains("g3c_labels.txt:1"), ValidationError);
  }
}

TEST_CASE("adjacency symmetry validated exhaustively on random graphs") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Graph g = testutil::random_graph(200, 0.02, 3, 4, seed);
    for (std::size_t v = 0; v < g.num_nodes; ++v)
      for (int u : g.neighbors(static_cast<int>(v)))
        CHECK(std::binary_search(g.neighbors(u).begin(), g.neighbors(u).end(),
                                 static_cast<int>(v)));
  }
}

TEST_CASE("select_labeled_per_class") {
  Graph g = testutil::random_graph(120, 0.0, 5, 2, 42);
  // random_graph labels uniformly at random; rebalance to guarantee counts
  for (std::size_t v = 0; v < g.num_nodes; ++v)
    g.labels[v] = static_cast<int>(v % 5);

  SUBCASE("n = 0 gives the empty set") {
    CHECK(select_labeled_per_class(g, 0, 9).empty());
  }
  SUBCASE("five per class over five classes gives 25 ids") {
    auto ids = select_labeled_per_class(g, 5, 9);
    CHECK(ids.size() == 25);
    std::vector<int> hist(5, 0);
    for (int v : ids) hist[g.labels[v]]++;
    for (int c = 0; c < 5; ++c) CHECK(hist[c] == 5);
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
  }
  SUBCASE("fixed seed reproduces the set") {
    CHECK(select_labeled_per_class(g, 5, 9) ==
          select_labeled_per_class(g, 5, 9));
  }
  SUBCASE("class with too few candidates is named in the error") {
    Graph small = g;
    for (std::size_t v = 0; v < small.num_nodes; ++v)
      if (small.labels[v] == 3) small.labels[v] = 2;
    CHECK_THROWS_WITH_AS(select_labeled_per_class(small, 5, 9),
                         doctest::Contains("class 3"), ValidationError);
  }
}

TEST_CASE("with_label_partition splits and validates") {
  Graph g = testutil::random_graph(30, 0.1, 3, 2, 7);
  auto selected = select_labeled_per_class(g, 2, 11);
  Graph p = g.with_label_partition(selected);
  CHECK(p.labeled_set.size() == 6);
  CHECK(p.unlabeled_set.size() == 24);
  p.validate();
  Graph masked = g;
  masked.labels[selected[0]] = kUnlabeled;
  CHECK_THROWS_AS(masked.with_label_partition(selected), ValidationError);
}

TEST_CASE("save / load round trip") {
  Graph g = testutil::random_graph(25, 0.15, 3, 4, 13);
  auto dir = std::filesystem::temp_directory_path();
  auto vocab = align_attributes(tokens("x", 4), tokens("x", 4));
  save_edges(dir / "rt_edges.txt", g);
  save_attributes(dir / "rt_attrs.txt", g, vocab.source_names,
                  vocab.source_index_map);
  save_labels(dir / "rt_labels.txt", g);
  Graph loaded = load_graph(dir / "rt_edges.txt", dir / "rt_attrs.txt",
                            dir / "rt_labels.txt", vocab, GraphSide::source,
                            g.num_nodes, g.num_classes);
  CHECK(loaded.adjacency == g.adjacency);
  CHECK(max_abs_diff(loaded.attributes, g.attributes) == 0.0);
  CHECK(loaded.labels == g.labels);
}
