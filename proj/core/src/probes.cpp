#include "roicae/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "roicae/linalg.hpp"
#include "roicae/optim.hpp"
#include "roicae/rng.hpp"

namespace roicae {

using json = nlohmann::json;

std::vector<LatentRecord> extract_latents(const Checkpoint& ckpt, const std::vector<Sample>& samples,
                                          const std::string& split_tag) {
    std::vector<LatentRecord> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        EncodeResult enc = encode_latent(ckpt.config, ckpt.params, s.image);
        Tensor xhat = cae_decode(ckpt.config, ckpt.params, enc.z);
        Tensor mask = roi_mask(s.roi, ckpt.config.width, ckpt.config.height);
        LatentRecord rec;
        rec.id = s.id;
        rec.site = s.site;
        rec.split = split_tag;
        rec.z = enc.z.data;
        rec.z_roi = roi_pool_features(enc.zmap, s.roi);
        rec.r_roi = roi_l1(s.image, xhat, mask);
        rec.e_roi = roi_edge_loss(s.image, xhat, mask);
        rec.z_norm = std::sqrt(std::inner_product(rec.z.begin(), rec.z.end(), rec.z.begin(), 0.0));
        rec.degradation = s.degradation;
        out.push_back(std::move(rec));
    }
    return out;
}

void write_latents_csv(const std::vector<LatentRecord>& records, const std::string& path) {
    if (records.empty()) throw std::invalid_argument("no latent records to write");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open latent csv for writing: " + path);
    const std::size_t zd = records.front().z.size();
    const std::size_t cd = records.front().z_roi.size();
    out << "id,site,split";
    for (std::size_t i = 0; i < zd; ++i) out << ",z" << i;
    for (std::size_t i = 0; i < cd; ++i) out << ",zroi" << i;
    out << ",r_roi,e_roi,z_norm,degradation\n";
    char buf[64];
    for (const auto& r : records) {
        if (r.z.size() != zd || r.z_roi.size() != cd)
            throw std::invalid_argument("latent records have inconsistent dimensions");
        out << r.id << ',' << r.site << ',' << r.split;
        auto emit = [&](double v) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            out << buf;
        };
        for (double v : r.z) emit(v);
        for (double v : r.z_roi) emit(v);
        emit(r.r_roi);
        emit(r.e_roi);
        emit(r.z_norm);
        emit(r.degradation);
        out << '\n';
    }
}

std::vector<LatentRecord> read_latents_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open latent csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty latent csv: " + path);
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    std::size_t zd = 0, cd = 0;
    for (const auto& c : cols) {
        if (c.rfind("zroi", 0) == 0) ++cd;
        else if (c.rfind('z', 0) == 0 && c != "z_norm") ++zd;
    }
    std::vector<LatentRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string c;
        std::vector<std::string> fields;
        while (std::getline(ss, c, ',')) fields.push_back(c);
        if (fields.size() != cols.size())
            throw std::runtime_error("malformed latent csv row in " + path);
        LatentRecord r;
        std::size_t i = 0;
        r.id = fields[i++];
        r.site = fields[i++];
        r.split = fields[i++];
        for (std::size_t k = 0; k < zd; ++k) r.z.push_back(std::stod(fields[i++]));
        for (std::size_t k = 0; k < cd; ++k) r.z_roi.push_back(std::stod(fields[i++]));
        r.r_roi = std::stod(fields[i++]);
        r.e_roi = std::stod(fields[i++]);
        r.z_norm = std::stod(fields[i++]);
        r.degradation = std::stod(fields[i++]);
        out.push_back(std::move(r));
    }
    return out;
}

std::array<double, 3> qc_feature_vector(const LatentRecord& rec) {
    return {rec.r_roi, rec.e_roi, rec.z_norm};
}

GaussianFit fit_gaussian(const std::vector<std::vector<double>>& train_z, double tau_override) {
    if (train_z.size() < 2) throw std::invalid_argument("gaussian fit needs at least 2 latents");
    const int dim = static_cast<int>(train_z.front().size());
    const double n = static_cast<double>(train_z.size());
    GaussianFit fit;
    fit.dim = dim;
    fit.mean.assign(static_cast<std::size_t>(dim), 0.0);
    for (const auto& z : train_z) {
        if (static_cast<int>(z.size()) != dim)
            throw std::invalid_argument("gaussian fit: inconsistent latent dimensions");
        for (int i = 0; i < dim; ++i) fit.mean[static_cast<std::size_t>(i)] += z[static_cast<std::size_t>(i)];
    }
    for (double& m : fit.mean) m /= n;
    fit.cov = Tensor::zeros({dim, dim});
    for (const auto& z : train_z) {
        for (int i = 0; i < dim; ++i) {
            const double di = z[static_cast<std::size_t>(i)] - fit.mean[static_cast<std::size_t>(i)];
            for (int j = 0; j <= i; ++j) {
                const double dj = z[static_cast<std::size_t>(j)] - fit.mean[static_cast<std::size_t>(j)];
                fit.cov.data[static_cast<std::size_t>(i * dim + j)] += di * dj;
            }
        }
    }
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j <= i; ++j) {
            double& v = fit.cov.data[static_cast<std::size_t>(i * dim + j)];
            v /= (n - 1.0);
            fit.cov.data[static_cast<std::size_t>(j * dim + i)] = v;
        }
    double trace = 0.0;
    for (int i = 0; i < dim; ++i) trace += fit.cov.data[static_cast<std::size_t>(i * dim + i)];
    fit.tau = tau_override >= 0.0 ? tau_override : 1e-6 * trace / static_cast<double>(dim);
    std::vector<double> a = fit.cov.data;
    for (int i = 0; i < dim; ++i) a[static_cast<std::size_t>(i * dim + i)] += fit.tau;
    if (!linalg::cholesky(a, dim))
        throw std::runtime_error("gaussian fit: covariance not positive definite after regularization");
    fit.cov_chol = Tensor{{dim, dim}, std::move(a)};
    return fit;
}

double mahalanobis_ood(const GaussianFit& fit, const std::vector<double>& z) {
    if (static_cast<int>(z.size()) != fit.dim)
        throw std::invalid_argument("mahalanobis: query dimension mismatch");
    std::vector<double> d(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) d[i] = z[i] - fit.mean[i];
    std::vector<double> x = linalg::cholesky_solve(fit.cov_chol.data, fit.dim, d);
    double q = std::inner_product(d.begin(), d.end(), x.begin(), 0.0);
    return std::sqrt(std::max(0.0, q));
}

double knn_ood(const std::vector<std::vector<double>>& train_z, const std::vector<double>& z, int k) {
    if (k < 1) throw std::invalid_argument("knn: K must be >= 1");
    if (static_cast<int>(train_z.size()) < k)
        throw std::invalid_argument("knn: need at least K=" + std::to_string(k) + " references, got " +
                                    std::to_string(train_z.size()));
    std::vector<double> dist;
    dist.reserve(train_z.size());
    for (const auto& t : train_z) {
        if (t.size() != z.size()) throw std::invalid_argument("knn: dimension mismatch");
        double q = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double d = t[i] - z[i];
            q += d * d;
        }
        dist.push_back(std::sqrt(q));
    }
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += dist[static_cast<std::size_t>(i)];
    return sum / static_cast<double>(k);
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

LinearProbeResult linear_probe(const std::vector<LatentRecord>& train,
                               const std::vector<LatentRecord>& eval_records, std::uint64_t seed) {
    if (train.empty()) throw std::invalid_argument("linear probe: empty training set");
    std::set<std::string> class_set;
    for (const auto& r : train) class_set.insert(r.site);
    if (class_set.size() < 2)
        throw std::invalid_argument("linear probe: training set has a single class");
    LinearProbeResult res;
    res.classes.assign(class_set.begin(), class_set.end());
    const int n_class = static_cast<int>(res.classes.size());
    const int dim = static_cast<int>(train.front().z.size());
    auto class_index = [&](const std::string& site) -> int {
        auto it = std::lower_bound(res.classes.begin(), res.classes.end(), site);
        if (it == res.classes.end() || *it != site) return -1;
        return static_cast<int>(it - res.classes.begin());
    };

    Rng rng(seed);
    ParamMap params;
    {
        Tensor w = Tensor::zeros({n_class, dim});
        for (double& v : w.data) v = rng.uniform(-0.01, 0.01);
        params.emplace("w", std::move(w));
        params.emplace("b", Tensor::zeros({n_class}));
    }
    AdamState adam(1e-2);
    const double wd = 1e-4;
    const double inv_n = 1.0 / static_cast<double>(train.size());

    for (int epoch = 0; epoch < 100; ++epoch) {
        ParamMap grads;
        grads.emplace("w", Tensor::zeros({n_class, dim}));
        grads.emplace("b", Tensor::zeros({n_class}));
        const Tensor& w = params.at("w");
        const Tensor& b = params.at("b");
        Tensor& gw = grads.at("w");
        Tensor& gb = grads.at("b");
        for (const auto& r : train) {
            const int y = class_index(r.site);
            std::vector<double> logits(static_cast<std::size_t>(n_class));
            for (int c = 0; c < n_class; ++c) {
                double s = b.data[static_cast<std::size_t>(c)];
                for (int i = 0; i < dim; ++i)
                    s += w.data[static_cast<std::size_t>(c * dim + i)] * r.z[static_cast<std::size_t>(i)];
                logits[static_cast<std::size_t>(c)] = s;
            }
            const double mx = *std::max_element(logits.begin(), logits.end());
            double denom = 0.0;
            for (double& l : logits) {
                l = std::exp(l - mx);
                denom += l;
            }
            for (int c = 0; c < n_class; ++c) {
                const double p = logits[static_cast<std::size_t>(c)] / denom;
                const double g = (p - (c == y ? 1.0 : 0.0)) * inv_n;
                gb.data[static_cast<std::size_t>(c)] += g;
                for (int i = 0; i < dim; ++i)
                    gw.data[static_cast<std::size_t>(c * dim + i)] += g * r.z[static_cast<std::size_t>(i)];
            }
        }
        for (std::size_t i = 0; i < gw.data.size(); ++i) gw.data[i] += wd * w.data[i];
        adam_step(params, grads, adam);
    }

    const Tensor& w = params.at("w");
    const Tensor& b = params.at("b");
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> per_site;  // conf, ent
    int correct = 0, seen_total = 0;
    for (const auto& r : eval_records) {
        std::vector<double> logits(static_cast<std::size_t>(n_class));
        for (int c = 0; c < n_class; ++c) {
            double s = b.data[static_cast<std::size_t>(c)];
            for (int i = 0; i < dim; ++i)
                s += w.data[static_cast<std::size_t>(c * dim + i)] * r.z[static_cast<std::size_t>(i)];
            logits[static_cast<std::size_t>(c)] = s;
        }
        auto [conf, ent] = softmax_stats(logits);
        res.confidence.push_back(conf);
        res.entropy.push_back(ent);
        auto& bucket = per_site[r.site];
        bucket.first.push_back(conf);
        bucket.second.push_back(ent);
        const int y = class_index(r.site);
        if (y >= 0) {
            const int pred = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
            if (pred == y) ++correct;
            ++seen_total;
        }
    }
    res.seen_accuracy = seen_total ? static_cast<double>(correct) / static_cast<double>(seen_total) : 0.0;
    for (const auto& [site, bucket] : per_site) {
        SiteStat st;
        st.site = site;
        st.seen = class_index(site) >= 0;
        st.n = static_cast<int>(bucket.first.size());
        std::tie(st.confidence_mean, st.confidence_std) = mean_std(bucket.first);
        std::tie(st.entropy_mean, st.entropy_std) = mean_std(bucket.second);
        res.per_site.push_back(std::move(st));
    }
    return res;
}

std::vector<double> ridge_fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                              double alpha) {
    if (x.empty() || x.size() != y.size()) throw std::invalid_argument("ridge: bad design matrix");
    if (alpha <= 0.0) throw std::invalid_argument("ridge: alpha must be positive");
    const int d = static_cast<int>(x.front().size());
    std::vector<double> a(static_cast<std::size_t>(d) * static_cast<std::size_t>(d), 0.0);
    std::vector<double> rhs(static_cast<std::size_t>(d), 0.0);
    for (std::size_t r = 0; r < x.size(); ++r) {
        const auto& row = x[r];
        if (static_cast<int>(row.size()) != d) throw std::invalid_argument("ridge: ragged design matrix");
        for (int i = 0; i < d; ++i) {
            rhs[static_cast<std::size_t>(i)] += row[static_cast<std::size_t>(i)] * y[r];
            for (int j = 0; j <= i; ++j)
                a[static_cast<std::size_t>(i * d + j)] +=
                    row[static_cast<std::size_t>(i)] * row[static_cast<std::size_t>(j)];
        }
    }
    for (int i = 0; i < d; ++i) {
        a[static_cast<std::size_t>(i * d + i)] += alpha;
        for (int j = 0; j < i; ++j)
            a[static_cast<std::size_t>(j * d + i)] = a[static_cast<std::size_t>(i * d + j)];
    }
    if (!linalg::cholesky(a, d)) throw std::runtime_error("ridge: normal equations not positive definite");
    return linalg::cholesky_solve(a, d, rhs);
}

RidgeProbeResult ridge_qc_probe(const std::vector<LatentRecord>& train,
                                const std::vector<LatentRecord>& eval_records, double alpha) {
    if (train.size() < 2) throw std::invalid_argument("ridge probe: need at least 2 training records");
    // the global latent alone does not transfer across site styles; the
    // ROI-pooled bottleneck features carry the anatomy-local signal, so the
    // regressor sees both
    auto features = [](const LatentRecord& r) {
        std::vector<double> f = r.z;
        f.insert(f.end(), r.z_roi.begin(), r.z_roi.end());
        return f;
    };
    const int d = static_cast<int>(train.front().z.size() + train.front().z_roi.size());
    std::vector<double> mu(static_cast<std::size_t>(d), 0.0), sd(static_cast<std::size_t>(d), 0.0);
    for (const auto& r : train) {
        const std::vector<double> f = features(r);
        for (int i = 0; i < d; ++i) mu[static_cast<std::size_t>(i)] += f[static_cast<std::size_t>(i)];
    }
    for (double& m : mu) m /= static_cast<double>(train.size());
    for (const auto& r : train) {
        const std::vector<double> f = features(r);
        for (int i = 0; i < d; ++i) {
            const double dv = f[static_cast<std::size_t>(i)] - mu[static_cast<std::size_t>(i)];
            sd[static_cast<std::size_t>(i)] += dv * dv;
        }
    }
    for (double& s : sd) {
        s = std::sqrt(s / static_cast<double>(train.size()));
        if (s == 0.0) s = 1.0;
    }
    auto standardize = [&](const std::vector<double>& z) {
        std::vector<double> out(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = (z[i] - mu[i]) / sd[i];
        return out;
    };

    std::vector<std::vector<double>> x;
    std::vector<double> y;
    double y_mean = 0.0;
    for (const auto& r : train) {
        x.push_back(standardize(features(r)));
        y.push_back(r.e_roi);
        y_mean += r.e_roi;
    }
    y_mean /= static_cast<double>(train.size());
    for (double& v : y) v -= y_mean;

    RidgeProbeResult res;
    res.w = ridge_fit(x, y, alpha);
    res.intercept = y_mean;

    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> per_site;  // true, pred
    for (const auto& r : eval_records) {
        std::vector<double> zs = standardize(features(r));
        double pred = res.intercept;
        for (std::size_t i = 0; i < zs.size(); ++i) pred += res.w[i] * zs[i];
        res.predictions.push_back(pred);
        auto& bucket = per_site[r.site];
        bucket.first.push_back(r.e_roi);
        bucket.second.push_back(pred);
    }
    for (const auto& [site, bucket] : per_site) {
        if (bucket.first.size() < 3) continue;  // rank stats undefined for tiny groups
        RidgeSiteStat st;
        st.site = site;
        st.n = static_cast<int>(bucket.first.size());
        std::tie(st.r2, st.spearman) = rank_stats(bucket.first, bucket.second);
        res.per_site.push_back(std::move(st));
    }
    return res;
}

PcaResult pca_project(const std::vector<std::vector<double>>& latents, int dims) {
    if (dims < 1 || dims > 2) throw std::invalid_argument("pca: dims must be 1 or 2");
    if (static_cast<int>(latents.size()) < dims + 1)
        throw std::invalid_argument("pca: need at least dims+1 samples");
    const int d = static_cast<int>(latents.front().size());
    PcaResult res;
    res.mean.assign(static_cast<std::size_t>(d), 0.0);
    for (const auto& z : latents) {
        if (static_cast<int>(z.size()) != d) throw std::invalid_argument("pca: inconsistent dimensions");
        for (int i = 0; i < d; ++i) res.mean[static_cast<std::size_t>(i)] += z[static_cast<std::size_t>(i)];
    }
    for (double& m : res.mean) m /= static_cast<double>(latents.size());

    std::vector<double> cov(static_cast<std::size_t>(d) * static_cast<std::size_t>(d), 0.0);
    for (const auto& z : latents)
        for (int i = 0; i < d; ++i) {
            const double di = z[static_cast<std::size_t>(i)] - res.mean[static_cast<std::size_t>(i)];
            for (int j = 0; j <= i; ++j) {
                const double dj = z[static_cast<std::size_t>(j)] - res.mean[static_cast<std::size_t>(j)];
                cov[static_cast<std::size_t>(i * d + j)] += di * dj;
            }
        }
    const double denom = static_cast<double>(latents.size() - 1);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j) {
            cov[static_cast<std::size_t>(i * d + j)] /= denom;
            cov[static_cast<std::size_t>(j * d + i)] = cov[static_cast<std::size_t>(i * d + j)];
        }
    double total = 0.0;
    for (int i = 0; i < d; ++i) total += cov[static_cast<std::size_t>(i * d + i)];
    if (total <= 0.0) throw std::invalid_argument("pca: degenerate (all-identical) latents");

    std::vector<double> vals, vecs;
    linalg::sym_eig(cov, d, vals, vecs);
    for (int k = 0; k < dims; ++k)
        res.explained_ratio.push_back(std::max(0.0, vals[static_cast<std::size_t>(k)]) / total);
    for (const auto& z : latents) {
        std::array<double, 2> c{0.0, 0.0};
        for (int k = 0; k < dims; ++k) {
            double s = 0.0;
            for (int i = 0; i < d; ++i)
                s += (z[static_cast<std::size_t>(i)] - res.mean[static_cast<std::size_t>(i)]) *
                     vecs[static_cast<std::size_t>(k * d + i)];
            c[static_cast<std::size_t>(k)] = s;
        }
        res.coords.push_back(c);
    }
    return res;
}

std::vector<Tensor> latent_interpolate(const Checkpoint& ckpt, const std::vector<double>& z_a,
                                       const std::vector<double>& z_b, int steps) {
    if (steps < 2) throw std::invalid_argument("interpolation needs at least 2 steps");
    if (z_a.size() != z_b.size() || static_cast<int>(z_a.size()) != ckpt.config.latent_dim)
        throw std::invalid_argument("interpolation: latent dimension mismatch");
    std::vector<Tensor> out;
    for (int s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
        Tensor z({1, ckpt.config.latent_dim}, std::vector<double>(z_a.size()));
        for (std::size_t i = 0; i < z_a.size(); ++i) z.data[i] = (1.0 - t) * z_a[i] + t * z_b[i];
        out.push_back(cae_decode(ckpt.config, ckpt.params, z));
    }
    return out;
}

ProbeReport run_probe_battery(const std::vector<LatentRecord>& records, const std::string& held_out_site,
                              std::uint64_t seed) {
    ProbeReport rep;
    rep.held_out_site = held_out_site;

    std::vector<LatentRecord> probe_train, probe_eval;
    std::vector<std::vector<double>> fit_z;
    std::vector<double> maha_pos, maha_neg, knn_pos, knn_neg;
    bool saw_held_out = false;
    for (const auto& r : records) {
        if (r.site == held_out_site) saw_held_out = true;
        if (r.site != held_out_site && r.split == "train") {
            probe_train.push_back(r);
            fit_z.push_back(r.z);
        } else {
            probe_eval.push_back(r);
        }
    }
    if (!saw_held_out) throw std::invalid_argument("probe battery: no records from held-out site " + held_out_site);
    if (probe_train.empty()) throw std::invalid_argument("probe battery: no seen-site training records");

    LinearProbeResult lin = linear_probe(probe_train, records, seed);
    rep.provenance = lin.per_site;
    rep.seen_accuracy = lin.seen_accuracy;

    GaussianFit fit = fit_gaussian(fit_z);
    const int k = std::min<int>(10, static_cast<int>(fit_z.size()));
    for (const auto& r : records) {
        if (r.site != held_out_site && r.split == "train") continue;  // never score the fit data
        const double dm = mahalanobis_ood(fit, r.z);
        const double dk = knn_ood(fit_z, r.z, k);
        if (r.site == held_out_site) {
            maha_pos.push_back(dm);
            knn_pos.push_back(dk);
        } else {
            maha_neg.push_back(dm);
            knn_neg.push_back(dk);
        }
    }
    if (maha_neg.empty())
        throw std::invalid_argument("probe battery: no seen-site held-out records for the OOD negatives");
    rep.mahalanobis_auroc = auroc(maha_pos, maha_neg);
    rep.knn_auroc = auroc(knn_pos, knn_neg);

    std::vector<LatentRecord> ridge_eval;
    for (const auto& r : records)
        if (!(r.site != held_out_site && r.split == "train")) ridge_eval.push_back(r);
    RidgeProbeResult qc = ridge_qc_probe(probe_train, ridge_eval, 1.0);
    rep.qc = qc.per_site;
    return rep;
}

std::string probe_report_to_json(const ProbeReport& rep) {
    json j;
    j["held_out_site"] = rep.held_out_site;
    j["seen_accuracy"] = rep.seen_accuracy;
    json prov = json::array();
    for (const auto& s : rep.provenance)
        prov.push_back({{"site", s.site},
                        {"seen", s.seen},
                        {"n", s.n},
                        {"confidence_mean", s.confidence_mean},
                        {"confidence_std", s.confidence_std},
                        {"entropy_mean", s.entropy_mean},
                        {"entropy_std", s.entropy_std}});
    j["provenance"] = prov;
    j["ood"] = {{"mahalanobis_auroc", rep.mahalanobis_auroc}, {"knn_auroc", rep.knn_auroc}};
    json qc = json::array();
    for (const auto& s : rep.qc)
        qc.push_back({{"site", s.site}, {"n", s.n}, {"r2", s.r2}, {"spearman", s.spearman}});
    j["qc"] = qc;
    return j.dump(2);
}

ProbeReport probe_report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("malformed probe report json: ") + e.what());
    }
    ProbeReport rep;
    rep.held_out_site = j.at("held_out_site").get<std::string>();
    rep.seen_accuracy = j.at("seen_accuracy").get<double>();
    for (const auto& s : j.at("provenance")) {
        SiteStat st;
        st.site = s.at("site").get<std::string>();
        st.seen = s.at("seen").get<bool>();
        st.n = s.at("n").get<int>();
        st.confidence_mean = s.at("confidence_mean").get<double>();
        st.confidence_std = s.at("confidence_std").get<double>();
        st.entropy_mean = s.at("entropy_mean").get<double>();
        st.entropy_std = s.at("entropy_std").get<double>();
        rep.provenance.push_back(std::move(st));
    }
    rep.mahalanobis_auroc = j.at("ood").at("mahalanobis_auroc").get<double>();
    rep.knn_auroc = j.at("ood").at("knn_auroc").get<double>();
    for (const auto& s : j.at("qc")) {
        RidgeSiteStat st;
        st.site = s.at("site").get<std::string>();
        st.n = s.at("n").get<int>();
        st.r2 = s.at("r2").get<double>();
        st.spearman = s.at("spearman").get<double>();
        rep.qc.push_back(std::move(st));
    }
    return rep;
}

void write_probe_report_csv(const ProbeReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open probe report for writing: " + path);
    char buf[256];
    out << "table,site,seen,n,confidence_mean,confidence_std,entropy_mean,entropy_std\n";
    for (const auto& s : rep.provenance) {
        std::snprintf(buf, sizeof(buf), "provenance,%s,%d,%d,%.6f,%.6f,%.6f,%.6f\n", s.site.c_str(),
                      s.seen ? 1 : 0, s.n, s.confidence_mean, s.confidence_std, s.entropy_mean,
                      s.entropy_std);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "ood,%s,,,%.6f,%.6f,,\n", rep.held_out_site.c_str(),
                  rep.mahalanobis_auroc, rep.knn_auroc);
    out << "table,site,,,mahalanobis_auroc,knn_auroc,,\n" << buf;
    out << "table,site,,n,r2,spearman,,\n";
    for (const auto& s : rep.qc) {
        std::snprintf(buf, sizeof(buf), "qc,%s,,%d,%.6f,%.6f,,\n", s.site.c_str(), s.n, s.r2, s.spearman);
        out << buf;
    }
}

}  // namespace roicae
