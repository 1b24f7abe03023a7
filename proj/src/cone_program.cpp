#include "opack/cone_program.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace opack {

void ConeLayout::validate() const {
    for (int d : psd_block_dims)
        if (d <= 0 || d > kMaxSymDim) throw InvalidInput("ConeLayout: bad PSD block dim");
    for (int d : soc_dims)
        if (d <= 0) throw InvalidInput("ConeLayout: bad SOC dim");
    if (nonneg_count < 0 || free_count < 0) throw InvalidInput("ConeLayout: negative counts");
}

void ConicProgram::validate() const {
    layout.validate();
    const int n = layout.total();
    if (int(objective.size()) != n) throw InvalidInput("ConicProgram: objective length mismatch");
    if (!objective.allFinite()) throw InvalidInput("ConicProgram: non-finite objective");
    for (const EqRow& r : rows) {
        if (r.cols.size() != r.coefs.size()) throw InvalidInput("ConicProgram: ragged row");
        if (!std::isfinite(r.rhs)) throw InvalidInput("ConicProgram: non-finite rhs");
        for (size_t k = 0; k < r.cols.size(); ++k) {
            if (r.cols[k] < 0 || r.cols[k] >= n) throw InvalidInput("ConicProgram: column out of range");
            if (!std::isfinite(r.coefs[k])) throw InvalidInput("ConicProgram: non-finite coefficient");
        }
    }
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::PrimalInfeasible: return "primal_infeasible";
        case SolveStatus::DualInfeasible: return "dual_infeasible";
        case SolveStatus::MaxIterations: return "max_iterations";
    }
    return "?";
}

// ---- debug dump ----------------------------------------------------------
//
// Line-oriented text format:
//   conicprogram 1
//   sense min|max
//   psd d1 d2 ...      (omitted when empty)
//   soc d1 d2 ...
//   nonneg k
//   free k
//   obj <count> followed by "index value" pairs, one per line
//   row <rhs> <count> followed by "index value" pairs, one per line

void ConicProgram::dump(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw Error("cannot open dump file: " + path);
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    f << "conicprogram 1\n";
    f << "sense " << (sense == Sense::Minimize ? "min" : "max") << "\n";
    f << "psd";
    for (int d : layout.psd_block_dims) f << ' ' << d;
    f << "\nsoc";
    for (int d : layout.soc_dims) f << ' ' << d;
    f << "\nnonneg " << layout.nonneg_count << "\nfree " << layout.free_count << "\n";
    int nz = 0;
    for (int i = 0; i < objective.size(); ++i)
        if (objective[i] != 0.0) ++nz;
    f << "obj " << nz << "\n";
    for (int i = 0; i < objective.size(); ++i)
        if (objective[i] != 0.0) f << i << ' ' << num(objective[i]) << "\n";
    for (const EqRow& r : rows) {
        f << "row " << num(r.rhs) << ' ' << r.cols.size() << "\n";
        for (size_t k = 0; k < r.cols.size(); ++k) f << r.cols[k] << ' ' << num(r.coefs[k]) << "\n";
    }
}

ConicProgram ConicProgram::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open dump file: " + path);
    std::string tok;
    int version;
    f >> tok >> version;
    if (tok != "conicprogram" || version != 1) throw InvalidInput("bad dump header");
    ConicProgram p;
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        ss >> tok;
        if (tok == "sense") {
            std::string s;
            ss >> s;
            p.sense = (s == "max") ? Sense::Maximize : Sense::Minimize;
        } else if (tok == "psd") {
            int d;
            while (ss >> d) p.layout.psd_block_dims.push_back(d);
        } else if (tok == "soc") {
            int d;
            while (ss >> d) p.layout.soc_dims.push_back(d);
        } else if (tok == "nonneg") {
            ss >> p.layout.nonneg_count;
        } else if (tok == "free") {
            ss >> p.layout.free_count;
        } else if (tok == "obj") {
            int count;
            ss >> count;
            p.objective = Vec::Zero(p.layout.total());
            for (int k = 0; k < count; ++k) {
                int idx;
                double v;
                f >> idx >> v;
                p.objective[idx] = v;
            }
            std::getline(f, line);
        } else if (tok == "row") {
            EqRow r;
            int count;
            ss >> r.rhs >> count;
            for (int k = 0; k < count; ++k) {
                int idx;
                double v;
                f >> idx >> v;
                r.add(idx, v);
            }
            std::getline(f, line);
            p.rows.push_back(std::move(r));
        } else {
            throw InvalidInput("bad dump line: " + line);
        }
    }
    if (p.objective.size() == 0) p.objective = Vec::Zero(p.layout.total());
    p.validate();
    return p;
}

// ---- ProgramBuilder ------------------------------------------------------

int ProgramBuilder::add_free(int k) {
    const int id = col_counter_;
    for (int i = 0; i < k; ++i) vars_.push_back({'f', 1});
    nfree_ += k;
    col_counter_ += k;
    return id;
}

int ProgramBuilder::add_nonneg(int k) {
    const int id = col_counter_;
    for (int i = 0; i < k; ++i) vars_.push_back({'n', 1});
    nnonneg_ += k;
    col_counter_ += k;
    return id;
}

int ProgramBuilder::add_soc(int dim) {
    const int id = col_counter_;
    vars_.push_back({'s', dim});
    socs_.push_back(dim);
    col_counter_ += dim;
    return id;
}

int ProgramBuilder::add_psd(int d) {
    const int id = col_counter_;
    vars_.push_back({'p', d});
    psds_.push_back(d);
    col_counter_ += svec_dim(d);
    return id;
}

void ProgramBuilder::set_objective(int col, double w) { obj_.push_back({col, w}); }

void ProgramBuilder::set_objective_psd(int base_col, const SymMat& w) {
    const Vec v = svec(w);
    for (int k = 0; k < v.size(); ++k)
        if (v[k] != 0.0) obj_.push_back({base_col + k, v[k]});
}

int ProgramBuilder::new_row(double rhs) {
    rows_.push_back({{}, rhs});
    return int(rows_.size()) - 1;
}

void ProgramBuilder::coef(int row, int col, double w) {
    if (w != 0.0) rows_[row].terms.push_back({col, w});
}

void ProgramBuilder::add_le(const std::vector<int>& cols, const std::vector<double>& coefs, double rhs) {
    const int s = add_nonneg(1);
    const int r = new_row(rhs);
    for (size_t k = 0; k < cols.size(); ++k) coef(r, cols[k], coefs[k]);
    coef(r, s, 1.0);
}

ConicProgram ProgramBuilder::build(Sense sense) {
    // map builder column ids to spec layout order: psd, soc, nonneg, free
    ConicProgram p;
    p.sense = sense;
    p.layout.psd_block_dims = psds_;
    p.layout.soc_dims = socs_;
    p.layout.nonneg_count = nnonneg_;
    p.layout.free_count = nfree_;

    std::vector<int>& remap = remap_;
    remap.assign(col_counter_, -1);
    int psd_at = 0;
    int soc_at = p.layout.psd_total();
    int nn_at = p.layout.nonneg_offset();
    int free_at = p.layout.free_offset();
    int col = 0;
    for (const Var& v : vars_) {
        switch (v.kind) {
            case 'p':
                for (int k = 0; k < svec_dim(v.dim); ++k) remap[col + k] = psd_at + k;
                psd_at += svec_dim(v.dim);
                col += svec_dim(v.dim);
                break;
            case 's':
                for (int k = 0; k < v.dim; ++k) remap[col + k] = soc_at + k;
                soc_at += v.dim;
                col += v.dim;
                break;
            case 'n':
                remap[col] = nn_at++;
                ++col;
                break;
            case 'f':
                remap[col] = free_at++;
                ++col;
                break;
        }
    }

    p.objective = Vec::Zero(p.layout.total());
    for (auto [c, w] : obj_) p.objective[remap[c]] += w;
    p.rows.reserve(rows_.size());
    for (const RawRow& rr : rows_) {
        EqRow r;
        r.rhs = rr.rhs;
        for (auto [c, w] : rr.terms) r.add(remap[c], w);
        p.rows.push_back(std::move(r));
    }
    p.validate();
    return p;
}

// ---- AffineMatExpr -------------------------------------------------------

void AffineMatExpr::add_constant(int i, int j, double v) {
    constant_.set(i, j, constant_(i, j) + v);
}

void AffineMatExpr::add_term(int i, int j, int col, double w) { terms_.push_back({i, j, col, w}); }

int AffineMatExpr::emit_psd(ProgramBuilder& b) const {
    const int base = b.add_psd(d_);
    const double s2 = std::sqrt(2.0);
    // one row per svec coordinate: slack - sum coef*x = constant
    std::vector<int> row_of(svec_dim(d_));
    const Vec cv = svec(constant_);
    for (int k = 0; k < svec_dim(d_); ++k) {
        row_of[k] = b.new_row(cv[k]);
        b.coef(row_of[k], base + k, 1.0);
    }
    for (const Term& t : terms_) {
        const int k = svec_index(d_, t.i, t.j);
        const double scale = (t.i == t.j) ? 1.0 : s2;
        b.coef(row_of[k], t.col, -scale * t.w);
    }
    return base;
}

} // namespace opack
