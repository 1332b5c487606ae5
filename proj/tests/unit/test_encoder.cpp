#include <cmath>
#include <numeric>

#include "doctest.h"
#include "grounding/core/errors.hpp"
#include "grounding/core/parameters.hpp"
#include "grounding/encoder/config.hpp"
#include "grounding/encoder/encoder.hpp"
#include "grounding/toy.hpp"
#include "oracles.hpp"

using namespace grounding;
using T = Tensor<double>;

namespace {

std::vector<double> values(const T& t) { return {t.values().begin(), t.values().end()}; }

T tensor(Shape shape, std::vector<double> v) { return T::from(std::move(shape), std::move(v), true); }

T random_tensor(Shape shape, Rng& rng, double sd = 1.0) {
  std::vector<double> v(numel(shape));
  for (double& x : v) x = rng.normal(0.0, sd);
  return T::from(std::move(shape), std::move(v), true);
}

oracle::Matrix to_matrix(const T& t) {
  const std::size_t rows = t.dim(0), cols = t.dim(1);
  oracle::Matrix m(rows, std::vector<double>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m[i][j] = t.values()[i * cols + j];
  return m;
}

oracle::Affine to_affine(const Linear<double>& l) {
  return {to_matrix(l.weight), values(l.bias)};
}

Linear<double> random_linear(std::size_t in, std::size_t out, Rng& rng) {
  return {random_tensor({in, out}, rng, 0.5), random_tensor({out}, rng, 0.5)};
}

AttentionParams<double> random_attention(std::size_t d, Rng& rng) {
  return {random_linear(d, d, rng), random_tensor({d, d}, rng, 0.5),
          random_linear(d, d, rng), random_linear(d, d, rng)};
}

BranchConfig small_image(bool spatial) {
  auto c = toy_model_config().image;
  c.use_spatial = spatial;
  c.dropout_p = 0.0;
  return c;
}

ImageBranch<double> make_image_branch(const BranchConfig& config, std::uint64_t seed) {
  static std::vector<std::unique_ptr<ParameterSet<double>>> keep_alive;
  keep_alive.push_back(std::make_unique<ParameterSet<double>>());
  Rng rng(seed);
  return ImageBranch<double>::create(config, ParameterFactory<double>(*keep_alive.back(), rng, kToyInitStd),
                                     1e-12);
}

TextBranch<double> make_text_branch(const BranchConfig& config, std::uint64_t seed,
                                    ParameterSet<double>& set) {
  Rng rng(seed);
  return TextBranch<double>::create(config, ParameterFactory<double>(set, rng, kToyInitStd), 1e-12);
}

ImageInput random_image_input(std::size_t batch, std::size_t objects, std::size_t feat,
                              Rng& rng) {
  ImageInput in;
  in.batch = batch;
  in.num_objects = objects;
  in.feature_dim = feat;
  for (std::size_t i = 0; i < batch * objects * feat; ++i)
    in.features.push_back(static_cast<float>(rng.normal()));
  for (std::size_t i = 0; i < batch * objects; ++i) {
    const double x1 = std::floor(rng.uniform() * 50), y1 = std::floor(rng.uniform() * 50);
    in.boxes.push_back({x1, y1, x1 + 1 + std::floor(rng.uniform() * 49),
                        y1 + 1 + std::floor(rng.uniform() * 49)});
    in.valid.push_back(1);
  }
  in.image_width.assign(batch, 100.0);
  in.image_height.assign(batch, 100.0);
  return in;
}

// Rows [b, i, :] of a [batch, seq, d] tensor.
std::vector<double> row(const T& h, std::size_t b, std::size_t i) {
  const std::size_t seq = h.dim(1), d = h.dim(2);
  const auto v = h.values();
  return {v.begin() + static_cast<long>((b * seq + i) * d),
          v.begin() + static_cast<long>((b * seq + i + 1) * d)};
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("normalize_box examples") {
  const auto full = normalize_box({0, 0, 640, 480}, 640, 480);
  CHECK(full == std::array<double, 5>{0, 0, 1, 1, 1});
  const auto quarter = normalize_box({0, 0, 320, 240}, 640, 480);
  CHECK(quarter == std::array<double, 5>{0, 0, 0.5, 0.5, 0.25});

  const auto a = normalize_box({10, 20, 110, 70}, 640, 480);
  const auto b = normalize_box({200, 300, 300, 350}, 640, 480);
  for (int i = 0; i < 4; ++i) CHECK(a[i] != b[i]);
  CHECK(a[4] == b[4]);

  CHECK_THROWS_AS(normalize_box({5, 5, 5, 10}, 640, 480), ValidationError);
  CHECK_THROWS_AS(normalize_box({5, 10, 8, 9}, 640, 480), ValidationError);
  CHECK_THROWS_AS(normalize_box({0, 0, 641, 10}, 640, 480), ValidationError);
}

TEST_CASE("normalize_box outputs lie in the unit cube") {
  Rng rng(8);
  for (int n = 0; n < 500; ++n) {
    const double w = 1 + std::floor(rng.uniform() * 1000), h = 1 + std::floor(rng.uniform() * 1000);
    const double x1 = rng.uniform() * (w - 0.5), y1 = rng.uniform() * (h - 0.5);
    const double x2 = x1 + (w - x1) * (0.01 + 0.99 * rng.uniform());
    const double y2 = y1 + (h - y1) * (0.01 + 0.99 * rng.uniform());
    for (double v : normalize_box({x1, y1, x2, y2}, w, h)) CHECK((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("spatial_embed with zero weights returns the bias") {
  SpatialMLP<double> mlp{{T::zeros({5, 4}, true), T::zeros({4}, true)},
                         {T::zeros({4, 3}, true), tensor({3}, {0.5, -1.0, 2.0})}};
  const auto out = spatial_embed(T::from({1, 5}, {0.1, 0.2, 0.3, 0.4, 0.02}), mlp);
  CHECK(values(out) == std::vector<double>{0.5, -1.0, 2.0});
  CHECK_THROWS_AS(spatial_embed(T::zeros({1, 4}), mlp), ShapeError);
}

TEST_CASE("spatial_embed separates distinct boxes") {
  const auto a = normalize_box({0, 0, 20, 30}, 100, 100);
  const auto b = normalize_box({40, 10, 90, 60}, 100, 100);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    SpatialMLP<double> mlp{random_linear(5, 8, rng), random_linear(8, 8, rng)};
    const auto ea = values(spatial_embed(T::from({1, 5}, {a.begin(), a.end()}), mlp));
    const auto eb = values(spatial_embed(T::from({1, 5}, {b.begin(), b.end()}), mlp));
    CHECK(max_abs_diff(ea, eb) > 1e-6);
  }
}

TEST_CASE("attention over a single key reduces to the value and output projections") {
  Rng rng(1);
  const auto params = random_attention(4, rng);
  const auto x = random_tensor({1, 4}, rng);
  const std::vector<std::uint8_t> valid{1};
  const auto got = values(multi_head_self_attention(x, valid, 2, params));
  const auto want = values(linear(linear(x, params.value), params.output));
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("attention matches a hand-computed two-head table") {
  // d = 4, H = 2, identity query/value/output, key swaps the two heads' halves
  // and doubles them.
  const auto eye = [] {
    std::vector<double> v(16, 0.0);
    for (int i = 0; i < 4; ++i) v[i * 5] = 1.0;
    return v;
  };
  AttentionParams<double> p{{tensor({4, 4}, eye()), T::zeros({4}, true)},
                            tensor({4, 4}, {0, 0, 2, 0, 0, 0, 0, 2, 2, 0, 0, 0, 0, 2, 0, 0}),
                            {tensor({4, 4}, eye()), T::zeros({4}, true)},
                            {tensor({4, 4}, eye()), T::zeros({4}, true)}};
  const auto x = T::from({2, 4}, {1, 0, 0, 1, 0, 1, 1, 0});
  const std::vector<std::uint8_t> valid{1, 1};
  const auto got = values(multi_head_self_attention(x, valid, 2, p));

  // Keys: k0 = x0 . K = [0, 2, 2, 0], k1 = [2, 0, 0, 2]; head dim 2, scale 1/sqrt2.
  // Head 0 queries [1,0] and [0,1] against keys [0,2], [2,0]:
  //   row 0 scores [0, 2/sqrt2], row 1 scores [2/sqrt2, 0].
  // Head 1 queries [0,1] and [1,0] against keys [2,0], [0,2]:
  //   row 0 scores [0, 2/sqrt2], row 1 scores [2/sqrt2, 0].
  const double s = std::sqrt(2.0);
  const double hi = std::exp(s) / (1 + std::exp(s)), lo = 1 - hi;
  // Row 0 weights [lo, hi] on values x0, x1; row 1 weights [hi, lo].
  const std::vector<double> want{lo, hi, hi, lo, hi, lo, lo, hi};
  CHECK(max_abs_diff(got, want) < 1e-12);

  const oracle::Affine id{to_matrix(T::from({4, 4}, eye())), {}};
  const oracle::Affine key{to_matrix(p.key), {}};
  const auto ref = oracle::attention(to_matrix(x), valid, 2, id, key, id, id);
  CHECK(max_abs_diff(got, {ref[0][0], ref[0][1], ref[0][2], ref[0][3], ref[1][0], ref[1][1],
                           ref[1][2], ref[1][3]}) < 1e-12);
}

TEST_CASE("attention matches the loop oracle on random inputs with padding") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t heads = 1 + seed % 4, d = heads * (1 + seed % 3), seq = 1 + seed % 6;
    const auto p = random_attention(d, rng);
    const auto x = random_tensor({seq, d}, rng);
    std::vector<std::uint8_t> valid(seq, 1);
    for (std::size_t i = 1; i < seq; ++i) valid[i] = rng.uniform() < 0.7;
    const auto got = multi_head_self_attention(x, valid, heads, p);
    const auto ref = oracle::attention(to_matrix(x), valid, heads, to_affine(p.query),
                                       {to_matrix(p.key), {}}, to_affine(p.value),
                                       to_affine(p.output));
    for (std::size_t i = 0; i < seq; ++i) {
      if (!valid[i]) continue;
      for (std::size_t c = 0; c < d; ++c)
        CHECK(got.values()[i * d + c] == doctest::Approx(ref[i][c]).epsilon(1e-10));
    }
  }
}

TEST_CASE("attention rejects fully masked sequences and bad head counts") {
  Rng rng(2);
  const auto p = random_attention(4, rng);
  const auto x = random_tensor({2, 4}, rng);
  const std::vector<std::uint8_t> none{0, 0};
  CHECK_THROWS_AS(multi_head_self_attention(x, none, 2, p), ValidationError);
  const std::vector<std::uint8_t> both{1, 1};
  CHECK_THROWS_AS(multi_head_self_attention(x, both, 3, p), ValidationError);
}

TEST_CASE("attention is permutation equivariant") {
  Rng rng(3);
  const auto p = random_attention(4, rng);
  const auto x = random_tensor({5, 4}, rng);
  const std::vector<std::uint8_t> valid(5, 1);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  const auto y = multi_head_self_attention(x, valid, 2, p);
  const auto yp = multi_head_self_attention(gather_rows(x, perm), valid, 2, p);
  CHECK(max_abs_diff(values(gather_rows(y, perm)), values(yp)) < 1e-12);
}

TEST_CASE("encoder layer with zero weights is a double layer norm of its input") {
  BranchConfig config = small_image(false);
  ParameterSet<double> set;
  Rng rng(0);
  ParameterFactory<double> factory(set, rng, 0.5);
  auto layer = EncoderLayerParams<double>::create(factory, config, 1e-12);
  for (auto& entry : set.entries())
    if (entry.name.find("weight") != std::string::npos)
      for (double& v : entry.tensor.mutable_values()) v = 0.0;
  const auto x = random_tensor({1, 3, 8}, rng);
  ForwardContext ctx;
  const std::vector<std::uint8_t> valid(3, 1);
  const auto y = encoder_layer(x, valid, config, layer, ctx);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto want = oracle::layer_norm(oracle::layer_norm(row(x, 0, i), 1e-12), 1e-12);
    CHECK(max_abs_diff(row(y, 0, i), want) < 1e-9);
  }
}

TEST_CASE("encoder layer sends gradient to every parameter") {
  BranchConfig config = small_image(false);
  ParameterSet<double> set;
  Rng rng(4);
  ParameterFactory<double> factory(set, rng, 0.5);
  const auto layer = EncoderLayerParams<double>::create(factory, config, 1e-12);
  // Break the symmetry of fresh zero biases and unit gains.
  for (auto& entry : set.entries())
    for (double& v : entry.tensor.mutable_values()) v += rng.normal(0.0, 0.1);
  const auto x = random_tensor({2, 3, 8}, rng);
  const auto w = T::from({2, 3, 8}, values(random_tensor({2, 3, 8}, rng)));
  ForwardContext ctx;
  const std::vector<std::uint8_t> valid{1, 1, 1, 1, 1, 0};
  backward(sum(mul(encoder_layer(x, valid, config, layer, ctx), w)));
  for (const auto& entry : set.entries()) {
    CAPTURE(entry.name);
    double norm = 0.0;
    for (double g : entry.tensor.grad()) norm += g * g;
    CHECK(norm > 0.0);
  }
}

TEST_CASE("a one-layer branch equals one encoder layer over the embeddings") {
  const auto config = small_image(true);
  const auto branch = make_image_branch(config, 5);
  Rng rng(6);
  const auto in = random_image_input(2, 3, config.feature_dim, rng);
  ForwardContext ctx;
  const auto h = encode_branch(in, branch, ctx);
  const auto manual = encoder_layer(embed_objects(in, branch.embeddings, 0.0, ctx), in.valid,
                                    config, branch.layers[0], ctx);
  CHECK(values(h) == values(manual));
}

TEST_CASE("image branch without spatial embedding has no spatial parameters") {
  auto off = small_image(false);
  ParameterSet<double> set;
  Rng rng(0);
  const auto branch = ImageBranch<double>::create(off, ParameterFactory<double>(set, rng, 0.1), 1e-12);
  CHECK_FALSE(branch.embeddings.spatial.has_value());
  for (const auto& e : set.entries()) CHECK(e.name.find("spatial") == std::string::npos);

  // With feature_dim == hidden_dim the RoI feature enters unprojected.
  off.feature_dim = off.hidden_dim;
  ParameterSet<double> set2;
  const auto plain = ImageBranch<double>::create(off, ParameterFactory<double>(set2, rng, 0.1), 1e-12);
  CHECK_FALSE(plain.embeddings.input_projection.has_value());
  ImageInput in = random_image_input(1, 2, off.feature_dim, rng);
  ForwardContext ctx;
  const auto e = embed_objects(in, plain.embeddings, 0.0, ctx);
  for (std::size_t o = 0; o < 2; ++o) {
    std::vector<double> raw(in.features.begin() + static_cast<long>(o * 8),
                            in.features.begin() + static_cast<long>((o + 1) * 8));
    CHECK(max_abs_diff(row(e, 0, o), oracle::layer_norm(raw, 1e-12)) < 1e-9);
  }
}

TEST_CASE("image branch is permutation equivariant with and without spatial embedding") {
  for (const bool spatial : {false, true}) {
    CAPTURE(spatial);
    const auto config = small_image(spatial);
    const auto branch = make_image_branch(config, 9);
    Rng rng(10);
    const auto in = random_image_input(1, 4, config.feature_dim, rng);
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    ImageInput permuted = in;
    for (std::size_t i = 0; i < 4; ++i) {
      permuted.boxes[i] = in.boxes[perm[i]];
      std::copy_n(in.features.begin() + static_cast<long>(perm[i] * config.feature_dim),
                  config.feature_dim,
                  permuted.features.begin() + static_cast<long>(i * config.feature_dim));
    }
    ForwardContext ctx;
    const auto h = encode_branch(in, branch, ctx);
    const auto hp = encode_branch(permuted, branch, ctx);
    for (std::size_t i = 0; i < 4; ++i) CHECK(max_abs_diff(row(hp, 0, i), row(h, 0, perm[i])) < 1e-9);
  }
}

TEST_CASE("spatial embedding makes the image branch box-sensitive") {
  const auto config = small_image(true);
  const auto branch = make_image_branch(config, 12);
  Rng rng(13);
  auto in = random_image_input(1, 2, config.feature_dim, rng);
  ForwardContext ctx;
  const auto before = encode_branch(in, branch, ctx);
  in.boxes[0] = {60, 60, 99, 90};
  const auto after = encode_branch(in, branch, ctx);
  CHECK(max_abs_diff(row(before, 0, 0), row(after, 0, 0)) > 1e-6);
}

TEST_CASE("image padding and batch composition do not change valid outputs") {
  const auto config = small_image(true);
  const auto branch = make_image_branch(config, 14);
  Rng rng(15);
  const auto a = random_image_input(1, 3, config.feature_dim, rng);
  const auto b = random_image_input(1, 3, config.feature_dim, rng);
  ForwardContext ctx;
  const auto ha = encode_branch(a, branch, ctx);

  ImageInput padded = a;
  padded.num_objects = 5;
  padded.features.resize(5 * config.feature_dim, 0.0f);
  padded.boxes.resize(5);
  padded.valid = {1, 1, 1, 0, 0};
  const auto hp = encode_branch(padded, branch, ctx);
  for (std::size_t i = 0; i < 3; ++i) CHECK(max_abs_diff(row(hp, 0, i), row(ha, 0, i)) < 1e-12);

  ImageInput pair = a;
  pair.batch = 2;
  pair.features.insert(pair.features.end(), b.features.begin(), b.features.end());
  pair.boxes.insert(pair.boxes.end(), b.boxes.begin(), b.boxes.end());
  pair.valid.insert(pair.valid.end(), b.valid.begin(), b.valid.end());
  pair.image_width.push_back(100);
  pair.image_height.push_back(100);
  const auto hpair = encode_branch(pair, branch, ctx);
  const auto hb = encode_branch(b, branch, ctx);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(max_abs_diff(row(hpair, 0, i), row(ha, 0, i)) < 1e-12);
    CHECK(max_abs_diff(row(hpair, 1, i), row(hb, 0, i)) < 1e-12);
  }
}

TEST_CASE("text embeddings") {
  const auto config = toy_model_config().text;
  ParameterSet<double> set;
  const auto branch = make_text_branch(config, 16, set);
  ForwardContext ctx;

  TextInput one{1, 1, {7}, {1}};
  const auto e = embed_tokens(one, branch.embeddings, 0.0, ctx);
  std::vector<double> sum(8);
  for (std::size_t c = 0; c < 8; ++c)
    sum[c] = branch.embeddings.token_table.values()[7 * 8 + c] +
             branch.embeddings.position_table.values()[c];
  CHECK(max_abs_diff(row(e, 0, 0), oracle::layer_norm(sum, 1e-12)) < 1e-9);

  TextInput twice{1, 2, {7, 7}, {1, 1}};
  const auto e2 = embed_tokens(twice, branch.embeddings, 0.0, ctx);
  CHECK(max_abs_diff(row(e2, 0, 0), row(e2, 0, 1)) > 1e-6);

  TextInput pair{2, 2, {7, 3, 7, 3}, {1, 1, 1, 1}};
  const auto ep = encode_branch(pair, branch, ctx);
  CHECK(row(ep, 0, 0) == row(ep, 1, 0));
  CHECK(row(ep, 0, 1) == row(ep, 1, 1));

  TextInput bad{1, 1, {config.vocab_size}, {1}};
  CHECK_THROWS_AS(encode_branch(bad, branch, ctx), ValidationError);
  TextInput too_long{1, config.max_positions + 1,
                     std::vector<std::size_t>(config.max_positions + 1, 1),
                     std::vector<std::uint8_t>(config.max_positions + 1, 1)};
  CHECK_THROWS_AS(encode_branch(too_long, branch, ctx), ValidationError);
  TextInput empty{1, 2, {1, 2}, {0, 0}};
  CHECK_THROWS_AS(encode_branch(empty, branch, ctx), ValidationError);
}

TEST_CASE("text branch is order-sensitive and padding invariant") {
  const auto config = toy_model_config().text;
  ParameterSet<double> set;
  const auto branch = make_text_branch(config, 17, set);
  ForwardContext ctx;
  const auto h = encode_branch(TextInput{1, 3, {4, 9, 2}, {1, 1, 1}}, branch, ctx);
  const auto swapped = encode_branch(TextInput{1, 3, {9, 4, 2}, {1, 1, 1}}, branch, ctx);
  CHECK(max_abs_diff(row(h, 0, 0), row(swapped, 0, 1)) > 1e-6);
  CHECK(max_abs_diff(row(h, 0, 2), row(swapped, 0, 2)) > 1e-6);

  const auto padded = encode_branch(TextInput{1, 5, {4, 9, 2, 0, 0}, {1, 1, 1, 0, 0}}, branch, ctx);
  for (std::size_t i = 0; i < 3; ++i) CHECK(max_abs_diff(row(h, 0, i), row(padded, 0, i)) < 1e-12);
}

TEST_CASE("dropout in training mode is seeded and inactive at inference") {
  auto config = toy_model_config().text;
  config.dropout_p = 0.3;
  ParameterSet<double> set;
  const auto branch = make_text_branch(config, 18, set);
  const TextInput in{1, 4, {1, 2, 3, 4}, {1, 1, 1, 1}};
  Rng r1(5), r2(5);
  ForwardContext a{true, &r1}, b{true, &r2}, eval;
  const auto ta = encode_branch(in, branch, a);
  CHECK(values(ta) == values(encode_branch(in, branch, b)));
  CHECK(values(ta) != values(encode_branch(in, branch, eval)));
  CHECK(values(encode_branch(in, branch, eval)) == values(encode_branch(in, branch, eval)));
}

TEST_CASE("branch configurations") {
  const auto bert = BranchConfig::bert_base_text();
  CHECK(bert.num_layers == 12);
  CHECK(bert.num_heads == 12);
  CHECK(bert.hidden_dim == 768);
  CHECK_NOTHROW(validate_text_config(bert));

  const auto image = BranchConfig::default_image();
  CHECK(image.num_layers == 1);
  CHECK(image.num_heads == 2);
  CHECK(image.hidden_dim == 2048);
  CHECK(image.use_spatial);
  CHECK_NOTHROW(validate_image_config(image));

  auto bad = image;
  bad.num_heads = 3;
  CHECK_THROWS_AS(validate_image_config(bad), ValidationError);
  bad = image;
  bad.dropout_p = 1.0;
  CHECK_THROWS_AS(validate_image_config(bad), ValidationError);
  bad = bert;
  bad.max_positions = 0;
  CHECK_THROWS_AS(validate_text_config(bad), ValidationError);
}

TEST_CASE("run labels") {
  CHECK(run_label(BranchConfig::default_image()) == "L1-H2-abs");
  auto c = BranchConfig::default_image();
  c.num_layers = 3;
  c.num_heads = 4;
  c.use_spatial = false;
  CHECK(run_label(c) == "L3-H4");
  CHECK(parse_run_label("L3-H4") == RunLabel{3, 4, false});
  CHECK(parse_run_label("L1-H2-abs") == RunLabel{1, 2, true});
  CHECK_THROWS_AS(parse_run_label("L0-H2"), ValidationError);
  CHECK_THROWS_AS(parse_run_label("L1H2"), ValidationError);
}
