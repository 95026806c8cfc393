#include "adaseg/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "adaseg/raster.hpp"

namespace adaseg {

using nlohmann::ordered_json;

void ModelSpec::validate() const
{
    if (depth < 3 || depth > 5) throw std::invalid_argument("depth must be 3, 4 or 5");
    if (base_filters != 8 && base_filters != 16 && base_filters != 32 && base_filters != 64) {
        throw std::invalid_argument("base_filters must be one of 8, 16, 32, 64");
    }
    if (!(dropout >= 0.0 && dropout <= 0.75)) throw std::invalid_argument("spatial dropout rate must lie in [0, 0.75]");
    if (out_channels < 1) throw std::invalid_argument("out_channels must be at least 1");
    const std::size_t step = std::size_t{1} << (depth - 1);
    if (rows == 0 || cols == 0 || rows % step != 0 || cols % step != 0) {
        throw std::invalid_argument("input size " + std::to_string(rows) + "x" + std::to_string(cols) +
                                    " is not divisible by " + std::to_string(step));
    }
}

// ---------------------------------------------------------------------------

Model::ConvBlock::ConvBlock(const std::string& name, std::size_t in, std::size_t out)
    : conv1(name + ".conv1", in, out), conv2(name + ".conv2", out, out), bn1(name + ".bn1", out), bn2(name + ".bn2", out)
{
}

Tensor Model::ConvBlock::forward(const Tensor& x)
{
    act1 = nn::relu(bn1.forward(conv1.forward(x)));
    act2 = nn::relu(bn2.forward(conv2.forward(act1)));
    return act2;
}

Tensor Model::ConvBlock::infer(const Tensor& x) const
{
    return nn::relu(bn2.infer(conv2.infer(nn::relu(bn1.infer(conv1.infer(x))))));
}

Tensor Model::ConvBlock::backward(const Tensor& dy)
{
    Tensor d = conv2.backward(bn2.backward(nn::relu_backward(dy, act2)));
    return conv1.backward(bn1.backward(nn::relu_backward(d, act1)));
}

void Model::ConvBlock::collect(std::vector<nn::Parameter*>& out)
{
    for (auto* p : {&conv1.kernel, &bn1.gamma, &bn1.beta, &bn1.running_mean, &bn1.running_var, &conv2.kernel,
                    &bn2.gamma, &bn2.beta, &bn2.running_mean, &bn2.running_var}) {
        out.push_back(p);
    }
}

// ---------------------------------------------------------------------------

Model Model::build(const ModelSpec& spec, std::vector<std::string> structures, std::uint64_t seed)
{
    spec.validate();
    if (structures.size() != spec.out_channels) {
        throw std::invalid_argument("model needs one structure name per output channel");
    }
    Model m;
    m.spec_ = spec;
    m.structures_ = std::move(structures);
    const int depth = spec.depth;
    std::size_t in = 1;
    for (int l = 0; l < depth; ++l) {
        m.encoder_.emplace_back("enc" + std::to_string(l), in, spec.filters(l));
        in = spec.filters(l);
    }
    for (int l = 0; l + 1 < depth; ++l) {
        m.pools_.emplace_back();
        m.pool_drop_.emplace_back(spec.dropout);
        m.ups_.emplace_back("up" + std::to_string(l), spec.filters(l + 1), spec.filters(l));
        m.cat_drop_.emplace_back(spec.dropout);
        m.decoder_.emplace_back("dec" + std::to_string(l), 2 * spec.filters(l), spec.filters(l));
    }
    m.head_ = nn::Head1x1("head", spec.filters(0), spec.out_channels);
    m.initialize(seed);
    return m;
}

void Model::initialize(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    auto fill_conv = [&](nn::Conv3x3& c) { nn::he_uniform(c.kernel.value, c.kernel.shape[1] * 9, rng); };
    for (auto& b : encoder_) {
        fill_conv(b.conv1);
        fill_conv(b.conv2);
    }
    for (std::size_t l = 0; l < ups_.size(); ++l) {
        nn::he_uniform(ups_[l].kernel.value, ups_[l].kernel.shape[3], rng);
        fill_conv(decoder_[l].conv1);
        fill_conv(decoder_[l].conv2);
    }
    nn::he_uniform(head_.kernel.value, head_.kernel.shape[1], rng);
    dropout_rng_.seed(rng());
}

void Model::check_input(const Tensor& images) const
{
    const auto& s = images.shape();
    if (s.c != 1 || s.h != spec_.rows || s.w != spec_.cols) {
        throw std::invalid_argument("model expects n x 1 x " + std::to_string(spec_.rows) + " x " +
                                    std::to_string(spec_.cols) + " input, got " + to_string(s));
    }
}

namespace {

double sigmoid(float logit)
{
    double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logit)));
    // Keep the codomain open so downstream logs stay finite.
    if (p <= 0.0) p = std::numeric_limits<double>::denorm_min();
    if (p >= 1.0) p = std::nextafter(1.0, 0.0);
    return p;
}

Probabilities to_probabilities(const Tensor& logits)
{
    Probabilities p(logits.shape());
    auto src = logits.values();
    auto dst = p.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = sigmoid(src[i]);
    return p;
}

}  // namespace

Probabilities Model::forward(const Tensor& images, Mode mode)
{
    if (mode == Mode::eval) return infer(images);
    check_input(images);
    const std::size_t levels = encoder_.size();
    Tensor x = images;
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        x = pool_drop_[l].forward(pools_[l].forward(encoder_[l].forward(x)), dropout_rng_);
    }
    x = encoder_[levels - 1].forward(x);
    for (std::size_t l = levels - 1; l-- > 0;) {
        x = nn::concat_channels(ups_[l].forward(x), encoder_[l].act2);
        x = decoder_[l].forward(cat_drop_[l].forward(x, dropout_rng_));
    }
    output_ = to_probabilities(head_.forward(x));
    return output_;
}

Probabilities Model::infer(const Tensor& images) const
{
    check_input(images);
    const std::size_t levels = encoder_.size();
    std::vector<Tensor> skips;
    Tensor x = images;
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        skips.push_back(encoder_[l].infer(x));
        x = pools_[l].infer(skips.back());
    }
    x = encoder_[levels - 1].infer(x);
    for (std::size_t l = levels - 1; l-- > 0;) {
        x = decoder_[l].infer(nn::concat_channels(ups_[l].infer(x), skips[l]));
    }
    return to_probabilities(head_.infer(x));
}

void Model::backward(const Probabilities& grad)
{
    if (!(grad.shape() == output_.shape())) {
        throw std::invalid_argument("gradient shape " + to_string(grad.shape()) + " does not match the last output " +
                                    to_string(output_.shape()));
    }
    Tensor dlogit(grad.shape());
    {
        auto g = grad.values();
        auto p = output_.values();
        auto d = dlogit.values();
        for (std::size_t i = 0; i < g.size(); ++i) d[i] = static_cast<float>(g[i] * p[i] * (1.0 - p[i]));
    }
    const std::size_t levels = encoder_.size();
    Tensor d = head_.backward(dlogit);
    std::vector<Tensor> skip_grads(levels);
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        d = cat_drop_[l].backward(decoder_[l].backward(d));
        auto [dup, dskip] = nn::split_channels(d, spec_.filters(static_cast<int>(l)));
        skip_grads[l] = std::move(dskip);
        d = ups_[l].backward(dup);
    }
    d = encoder_[levels - 1].backward(d);
    for (std::size_t l = levels - 1; l-- > 0;) {
        Tensor dskip = pools_[l].backward(pool_drop_[l].backward(d));
        auto acc = dskip.values();
        auto extra = skip_grads[l].values();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += extra[i];
        d = encoder_[l].backward(dskip);
    }
}

std::vector<std::uint32_t> Model::activation_pattern() const
{
    std::vector<std::uint32_t> out;
    auto signs = [&](const Tensor& t) {
        for (float v : t.values()) out.push_back(v > 0.0f ? 1u : 0u);
    };
    for (const auto& b : encoder_) {
        signs(b.act1);
        signs(b.act2);
    }
    for (const auto& b : decoder_) {
        signs(b.act1);
        signs(b.act2);
    }
    for (const auto& p : pools_) out.insert(out.end(), p.argmax().begin(), p.argmax().end());
    return out;
}

std::vector<nn::Parameter*> Model::parameters()
{
    std::vector<nn::Parameter*> out;
    for (auto& b : encoder_) b.collect(out);
    for (std::size_t l = 0; l < ups_.size(); ++l) {
        out.push_back(&ups_[l].kernel);
        out.push_back(&ups_[l].bias);
        decoder_[l].collect(out);
    }
    out.push_back(&head_.kernel);
    out.push_back(&head_.bias);
    return out;
}

std::vector<const nn::Parameter*> Model::parameters() const
{
    auto all = const_cast<Model*>(this)->parameters();
    return {all.begin(), all.end()};
}

std::vector<nn::Parameter*> Model::trainable_parameters()
{
    std::vector<nn::Parameter*> out;
    for (auto* p : parameters()) {
        if (p->trainable) out.push_back(p);
    }
    return out;
}

std::size_t Model::trainable_count() const
{
    std::size_t n = 0;
    for (const auto* p : parameters()) {
        if (p->trainable) n += p->size();
    }
    return n;
}

void Model::zero_grad()
{
    for (auto* p : parameters()) p->zero_grad();
}

void Model::extend_output(const std::string& structure, std::uint64_t seed)
{
    for (const auto& s : structures_) {
        if (s == structure) throw std::invalid_argument("model already predicts '" + structure + "'");
    }
    std::mt19937_64 rng(seed);
    head_.add_channel(rng);
    structures_.push_back(structure);
    spec_.out_channels = structures_.size();
}

// ---------------------------------------------------------------------------

void Model::save(const std::filesystem::path& dir) const
{
    std::filesystem::create_directories(dir / "params");
    std::ostringstream rng_state;
    rng_state << dropout_rng_;
    ordered_json spec;
    spec["depth"] = spec_.depth;
    spec["base_filters"] = spec_.base_filters;
    spec["spatial_dropout_rate"] = spec_.dropout;
    spec["out_channels"] = spec_.out_channels;
    spec["input_size"] = {spec_.rows, spec_.cols};
    spec["structures"] = structures_;
    spec["rng_state"] = rng_state.str();
    raster::write_text(dir / "spec.json", spec.dump(2) + "\n");

    ordered_json index = ordered_json::array();
    for (const auto* p : parameters()) {
        const std::string file = "params/" + p->name + ".f32";
        raster::write_f32(dir / file, p->value);
        index.push_back({{"name", p->name}, {"shape", p->shape}, {"trainable", p->trainable}, {"file", file}});
    }
    raster::write_text(dir / "index.json", index.dump(2) + "\n");
}

Model Model::load(const std::filesystem::path& dir)
{
    auto read_json = [](const std::filesystem::path& path) {
        const auto bytes = raster::read_bytes(path);
        try {
            return ordered_json::parse(bytes.begin(), bytes.end());
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path.string() + ": " + e.what());
        }
    };
    const auto spec_json = read_json(dir / "spec.json");
    const auto index = read_json(dir / "index.json");
    Model m;
    try {
        ModelSpec spec;
        spec.depth = spec_json.at("depth").get<int>();
        spec.base_filters = spec_json.at("base_filters").get<int>();
        spec.dropout = spec_json.at("spatial_dropout_rate").get<double>();
        spec.out_channels = spec_json.at("out_channels").get<std::size_t>();
        spec.rows = spec_json.at("input_size").at(0).get<std::size_t>();
        spec.cols = spec_json.at("input_size").at(1).get<std::size_t>();
        m = build(spec, spec_json.at("structures").get<std::vector<std::string>>(), 0);
        std::istringstream rng_state(spec_json.at("rng_state").get<std::string>());
        rng_state >> m.dropout_rng_;
        if (!rng_state) throw std::runtime_error("bad rng_state");
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error((dir / "spec.json").string() + ": " + e.what());
    }
    auto params = m.parameters();
    if (!index.is_array() || index.size() != params.size()) {
        throw std::runtime_error((dir / "index.json").string() + ": parameter count does not match the spec");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& entry = index[i];
        auto* p = params[i];
        if (entry.at("name").get<std::string>() != p->name ||
            entry.at("shape").get<std::vector<std::size_t>>() != p->shape) {
            throw std::runtime_error((dir / "index.json").string() + ": unexpected parameter '" +
                                     entry.at("name").get<std::string>() + "'");
        }
        p->value = raster::read_f32(dir / entry.at("file").get<std::string>(), p->size());
    }
    return m;
}

Tensor stack_images(const std::vector<const Grid<float>*>& images)
{
    if (images.empty()) return {};
    const std::size_t rows = images.front()->rows(), cols = images.front()->cols();
    Tensor t({images.size(), 1, rows, cols});
    for (std::size_t n = 0; n < images.size(); ++n) {
        if (!images[n]->same_shape(rows, cols)) throw std::invalid_argument("images differ in size");
        auto v = images[n]->values();
        std::copy(v.begin(), v.end(), t.sample(n));
    }
    return t;
}

}  // namespace adaseg
