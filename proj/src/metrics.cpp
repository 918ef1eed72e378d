#include "fcaug/metrics.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <optional>

#include "fcaug/error.hpp"
#include "fcaug/parallel.hpp"

namespace fc {

double overlap_score(const ViewPair& pair, const SaliencyMap& source_map, double eps)
{
    if (pair.v1.rows() != source_map.rows() || pair.v1.cols() != source_map.cols())
        throw ValidationError("saliency map does not match the view dimensions");
    const BinaryMask s = salient_region(source_map, eps);
    const ChainMasks m1 = track_mask(pair.chain1, s);
    const ChainMasks m2 = track_mask(pair.chain2, s);
    const auto in_frame = (m1.rigid && m2.rigid).count();
    if (in_frame == 0)
        return 1.0;
    return double((m1.alive && m2.alive).count()) / double(in_frame);
}

namespace {

double view_preservation(const TransformChain& chain, const BinaryMask& lesion)
{
    const ChainMasks m = track_mask(chain, lesion);
    const auto in_frame = m.rigid.count();
    return in_frame == 0 ? 1.0 : double(m.alive.count()) / double(in_frame);
}

}  // namespace

double lesion_preservation(const ViewPair& pair, const BinaryMask& lesion_mask)
{
    if (pair.v1.rows() != lesion_mask.rows() || pair.v1.cols() != lesion_mask.cols())
        throw ValidationError("lesion mask does not match the view dimensions");
    if (lesion_mask.count() == 0)
        return 1.0;
    return std::min(view_preservation(pair.chain1, lesion_mask), view_preservation(pair.chain2, lesion_mask));
}

bool lesion_destroyed(const TransformChain& chain, const BinaryMask& lesion_mask)
{
    const ChainMasks m = track_mask(chain, lesion_mask);
    return m.rigid.count() > 0 && m.alive.count() == 0;
}

OverlapStats overlap_monte_carlo(std::span<const Sample> data, const PairRecipe& recipe, std::size_t n_pairs,
                                 std::uint64_t seed, int workers)
{
    if (data.empty())
        throw ValidationError("empty dataset");
    std::vector<std::optional<ViewPair>> pairs(n_pairs);
    std::vector<double> scores(n_pairs, 0.0);
    parallel_for(n_pairs, workers, [&](std::size_t i) {
        const Sample& s = data[i % data.size()];
        try {
            ViewPair p = generate_pair(s.image, s.map, recipe.mode, recipe.spec, recipe.focus,
                                       pair_key(seed, s.id, i));
            scores[i] = overlap_score(p, s.map, recipe.focus.salient_eps);
            p.v1.resize(0, 0);
            p.v2.resize(0, 0);
            p.map1.resize(0, 0);
            p.map2.resize(0, 0);
            pairs[i] = std::move(p);
        } catch (const RejectionFailure&) {
        }
    });

    OverlapStats st;
    double sum = 0.0, sq = 0.0, attempts = 0.0;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        if (!pairs[i])
            continue;
        ++st.pairs;
        sum += scores[i];
        sq += scores[i] * scores[i];
        attempts += pairs[i]->attempts;
    }
    st.reject_rate = n_pairs ? double(n_pairs - st.pairs) / double(n_pairs) : 0.0;
    if (st.pairs > 0) {
        const double n = double(st.pairs);
        st.mean = sum / n;
        st.stddev = st.pairs > 1 ? std::sqrt(std::max(0.0, (sq - n * st.mean * st.mean) / (n - 1.0))) : 0.0;
        st.sem = st.stddev / std::sqrt(n);
        st.attempts_mean = attempts / n;
    }
    return st;
}

std::string to_string(SweepAxis axis) { return axis == SweepAxis::crop_zoom ? "crop_zoom" : "cutout_px"; }

SweepAxis parse_sweep_axis(const std::string& name)
{
    if (name == "crop_zoom")
        return SweepAxis::crop_zoom;
    if (name == "cutout_px")
        return SweepAxis::cutout_px;
    throw ConfigError("unknown sweep axis '" + name + "'");
}

void SweepGrid::validate() const
{
    if (values.empty())
        throw ConfigError("sweep needs at least one value");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (!(values[i] > values[i - 1]))
            throw ConfigError("sweep values must be strictly increasing");
    if (label_fractions.empty())
        throw ConfigError("sweep needs at least one label fraction");
    for (double f : label_fractions)
        if (!(f > 0.0 && f <= 1.0))
            throw ConfigError("label fractions must lie in (0, 1]");
    for (double v : values)
        at(v).spec.validate();
}

PairRecipe SweepGrid::at(double value) const
{
    PairRecipe r = recipe;
    if (axis == SweepAxis::crop_zoom) {
        r.spec.crop_zoom = value;
    } else {
        if (value < 0.0 || value != std::floor(value))
            throw ConfigError("cutout sweep values must be non-negative integers");
        r.spec.cutout_px = static_cast<int>(value);
    }
    return r;
}

std::vector<SweepRow> run_sweep(const SweepGrid& grid, const TrainConfig& train, const EncoderConfig& enc,
                                std::span<const Sample> train_set, std::span<const Sample> test_set,
                                const SweepOptions& opt)
{
    grid.validate();
    const std::size_t nf = grid.label_fractions.size();
    std::vector<SweepRow> rows(grid.values.size() * nf);
    // Cells run in parallel; everything inside a cell is single-threaded.
    parallel_for(grid.values.size(), opt.workers, [&](std::size_t v) {
        const double value = grid.values[v];
        const std::uint64_t cell_seed = derive_key(train.seed, std::bit_cast<std::uint64_t>(value));
        const PairRecipe recipe = grid.at(value);
        for (std::size_t f = 0; f < nf; ++f) {
            SweepRow& row = rows[v * nf + f];
            row.axis = grid.axis;
            row.value = value;
            row.label_fraction = grid.label_fractions[f];
        }
        try {
            const OverlapStats ov =
                overlap_monte_carlo(train_set, recipe, opt.overlap_pairs, derive_key(cell_seed, 0x0e1a), 1);
            TrainConfig cfg = train;
            cfg.seed = cell_seed;
            const TrainResult tr = pretrain(cfg, enc, train_set, recipe, 1);
            double reject = 0.0, attempts = 0.0;
            for (const auto& e : tr.log) {
                reject += e.reject_rate;
                attempts += e.attempts_mean;
            }
            if (!tr.log.empty()) {
                reject /= double(tr.log.size());
                attempts /= double(tr.log.size());
            } else {
                reject = ov.reject_rate;
                attempts = ov.attempts_mean;
            }
            for (std::size_t f = 0; f < nf; ++f) {
                SweepRow& row = rows[v * nf + f];
                const ProbeResult pr = linear_probe(tr.online, train_set, test_set, opt.n_classes,
                                                    row.label_fraction, derive_key(cell_seed, f), opt.probe);
                row.acc = pr.accuracy;
                row.mae = pr.mae;
                row.overlap_mean = ov.mean;
                row.reject_rate = reject;
                row.attempts_mean = attempts;
            }
        } catch (const Error& e) {
            for (std::size_t f = 0; f < nf; ++f)
                rows[v * nf + f].status = std::string("failed: ") + e.what();
        }
    });
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    std::string out = "axis,value,label_fraction,acc,mae,overlap_mean,reject_rate,attempts_mean,status\n";
    char line[256];
    for (const auto& r : rows) {
        std::string status = r.status;
        for (char& ch : status)
            if (ch == ',' || ch == '\n')
                ch = ';';
        std::snprintf(line, sizeof line, "%s,%.9g,%.9g,%.6f,%.6f,%.6f,%.6f,%.6f,", to_string(r.axis).c_str(),
                      r.value, r.label_fraction, r.acc, r.mae, r.overlap_mean, r.reject_rate, r.attempts_mean);
        out += line;
        out += status;
        out += '\n';
    }
    return out;
}

}  // namespace fc
