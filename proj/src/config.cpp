#include "ggdseg/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ggdseg {

namespace pt = boost::property_tree;

namespace {

template <typename T>
T convert(const std::string& key, const std::string& text) {
    std::istringstream is(text);
    T v{};
    is >> v;
    if (!is || !(is >> std::ws).eof()) throw std::invalid_argument("config: bad value '" + text + "' for " + key);
    return v;
}

template <>
bool convert<bool>(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw std::invalid_argument("config: bad boolean '" + text + "' for " + key);
}

template <>
std::string convert<std::string>(const std::string&, const std::string& text) {
    return text;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

template <typename T>
Setter field(T RunConfig::*member) {
    return [member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = convert<T>(k, v); };
}

template <typename T, typename M>
Setter nested(M RunConfig::*outer, T M::*inner) {
    return [outer, inner](RunConfig& c, const std::string& k, const std::string& v) {
        (c.*outer).*inner = convert<T>(k, v);
    };
}

Setter region(std::size_t idx, bool shape) {
    return [idx, shape](RunConfig& c, const std::string& k, const std::string& v) {
        auto& regions = c.phantom.regions;
        if (regions.size() <= idx) regions.resize(idx + 1);
        (shape ? regions[idx].shape : regions[idx].alpha) = convert<double>(k, v);
    };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        t["model.noise_std"] = nested(&RunConfig::hyper, &Hyperparams::noise_std);
        t["model.delta1"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.hyper.huber.delta1 = convert<double>(k, v);
        };
        t["model.delta2"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.hyper.huber.delta2 = convert<double>(k, v);
        };
        t["model.shape_min"] = nested(&RunConfig::hyper, &Hyperparams::shape_min);
        t["model.shape_max"] = nested(&RunConfig::hyper, &Hyperparams::shape_max);
        t["model.tv_shape"] = nested(&RunConfig::hyper, &Hyperparams::tv_shape);
        t["model.tv_scale"] = nested(&RunConfig::hyper, &Hyperparams::tv_scale);
        t["model.mu_beta"] = nested(&RunConfig::hyper, &Hyperparams::mu_beta);
        t["model.sigma_beta"] = nested(&RunConfig::hyper, &Hyperparams::sigma_beta);
        t["model.gamma0"] = nested(&RunConfig::hyper, &Hyperparams::gamma0);
        t["model.gamma1"] = nested(&RunConfig::hyper, &Hyperparams::gamma1);
        t["model.gamma2"] = nested(&RunConfig::hyper, &Hyperparams::gamma2);
        t["model.precond_mu"] = nested(&RunConfig::hyper, &Hyperparams::precond_mu);
        t["model.metric"] = [](RunConfig& c, const std::string&, const std::string& v) {
            c.hyper.metric = metric_mode_from_string(v);
        };

        t["solver.outer_max"] = nested(&RunConfig::stop, &StoppingCriteria::outer_max);
        t["solver.outer_rel_state"] = nested(&RunConfig::stop, &StoppingCriteria::outer_rel_state);
        t["solver.outer_rel_obj"] = nested(&RunConfig::stop, &StoppingCriteria::outer_rel_obj);
        t["solver.mm_max"] = nested(&RunConfig::stop, &StoppingCriteria::mm_max);
        t["solver.mm_rel"] = nested(&RunConfig::stop, &StoppingCriteria::mm_rel);
        t["solver.dfb_max"] = nested(&RunConfig::stop, &StoppingCriteria::dfb_max);
        t["solver.dfb_rel"] = nested(&RunConfig::stop, &StoppingCriteria::dfb_rel);
        t["solver.pd_max"] = nested(&RunConfig::stop, &StoppingCriteria::pd_max);
        t["solver.pd_rel"] = nested(&RunConfig::stop, &StoppingCriteria::pd_rel);
        t["solver.decrease_tol"] = nested(&RunConfig::solver, &SolverOptions::decrease_tol);
        t["solver.block_retries"] = nested(&RunConfig::solver, &SolverOptions::block_retries);

        t["phantom.height"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.phantom.grid.height = convert<std::size_t>(k, v);
        };
        t["phantom.width"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.phantom.grid.width = convert<std::size_t>(k, v);
        };
        t["phantom.layout"] = [](RunConfig& c, const std::string&, const std::string& v) {
            c.phantom.layout = phantom_layout_from_string(v);
        };
        for (std::size_t j = 0; j < 3; ++j) {
            t["phantom.shape" + std::to_string(j + 1)] = region(j, true);
            t["phantom.alpha" + std::to_string(j + 1)] = region(j, false);
        }

        t["psf.side"] = nested(&RunConfig::psf, &PsfSpec::side);
        t["psf.std"] = nested(&RunConfig::psf, &PsfSpec::std_dev);
        t["psf.file"] = nested(&RunConfig::psf, &PsfSpec::file);

        t["run.seed"] = field(&RunConfig::seed);
        t["run.levels"] = field(&RunConfig::levels);
        t["run.out"] = field(&RunConfig::out);
        t["run.timing"] = field(&RunConfig::timing);
        t["run.png"] = field(&RunConfig::png);
        return t;
    }();
    return table;
}

}  // namespace

void RunConfig::validate() const {
    hyper.validate();
    stop.validate();
    phantom.validate();
    if (psf.file.empty()) {
        if (psf.side < 1 || psf.side % 2 == 0) throw std::invalid_argument("config: psf.side must be a positive odd integer");
        if (!(psf.std_dev > 0.0)) throw std::invalid_argument("config: psf.std must be positive");
    }
    if (levels < 2 || levels > kOtsuMaxLevels) throw std::invalid_argument("config: run.levels must lie in [2, 4]");
    if (out.empty()) throw std::invalid_argument("config: run.out must not be empty");
    if (solver.block_retries < 0) throw std::invalid_argument("config: solver.block_retries must be nonnegative");
    if (!(solver.decrease_tol >= 0.0)) throw std::invalid_argument("config: solver.decrease_tol must be nonnegative");
    for (const auto& r : phantom.regions) {
        if (r.shape < hyper.shape_min || r.shape > hyper.shape_max) {
            throw std::invalid_argument("config: phantom shapes must lie in [shape_min, shape_max]");
        }
    }
}

RunConfig parse_config(std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    RunConfig cfg;
    const auto& table = setters();
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw std::invalid_argument("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            const auto it = table.find(full);
            if (it == table.end()) throw std::invalid_argument("config: unknown key " + full);
            it->second(cfg, full, value.data());
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    return parse_config(in);
}

std::string dump_config(const RunConfig& c) {
    std::ostringstream os;
    os.precision(17);
    const Hyperparams& h = c.hyper;
    os << "[model]\n"
       << "noise_std=" << h.noise_std << "\ndelta1=" << h.huber.delta1 << "\ndelta2=" << h.huber.delta2
       << "\nshape_min=" << h.shape_min << "\nshape_max=" << h.shape_max << "\ntv_shape=" << h.tv_shape
       << "\ntv_scale=" << h.tv_scale << "\nmu_beta=" << h.mu_beta << "\nsigma_beta=" << h.sigma_beta
       << "\ngamma0=" << h.gamma0 << "\ngamma1=" << h.gamma1 << "\ngamma2=" << h.gamma2
       << "\nmetric=" << to_string(h.metric) << "\nprecond_mu=" << h.precond_mu << "\n\n";
    const StoppingCriteria& s = c.stop;
    os << "[solver]\n"
       << "outer_max=" << s.outer_max << "\nouter_rel_state=" << s.outer_rel_state
       << "\nouter_rel_obj=" << s.outer_rel_obj << "\nmm_max=" << s.mm_max << "\nmm_rel=" << s.mm_rel
       << "\ndfb_max=" << s.dfb_max << "\ndfb_rel=" << s.dfb_rel << "\npd_max=" << s.pd_max
       << "\npd_rel=" << s.pd_rel << "\ndecrease_tol=" << c.solver.decrease_tol
       << "\nblock_retries=" << c.solver.block_retries << "\n\n";
    os << "[phantom]\n"
       << "height=" << c.phantom.grid.height << "\nwidth=" << c.phantom.grid.width
       << "\nlayout=" << to_string(c.phantom.layout) << "\n";
    for (std::size_t j = 0; j < c.phantom.regions.size(); ++j) {
        os << "shape" << j + 1 << "=" << c.phantom.regions[j].shape << "\n";
        os << "alpha" << j + 1 << "=" << c.phantom.regions[j].alpha << "\n";
    }
    os << "\n[psf]\nside=" << c.psf.side << "\nstd=" << c.psf.std_dev << "\n";
    if (!c.psf.file.empty()) os << "file=" << c.psf.file << "\n";
    os << "\n[run]\nseed=" << c.seed << "\nlevels=" << c.levels << "\nout=" << c.out
       << "\ntiming=" << (c.timing ? "true" : "false") << "\npng=" << (c.png ? "true" : "false") << "\n";
    return os.str();
}

}  // namespace ggdseg
