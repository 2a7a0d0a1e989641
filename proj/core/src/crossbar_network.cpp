#include "regmem/crossbar_network.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "regmem/errors.hpp"

namespace regmem {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRounding = 16.0 * std::numeric_limits<double>::epsilon();

std::string cell_name(const char* prefix, int r, int c) {
    return std::string(prefix) + "_" + std::to_string(r) + "_" + std::to_string(c);
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    // the smaller index becomes the root so ground (0) always represents its class
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) parent[b] = a; else parent[a] = b;
    }
};

struct Conductor {
    int a, b;  // class indices, -1 = ground
    double g;
};

struct Device {
    int cell;
    int a, b;          // classes of AE and OE
    double fixed_g;    // NaN = model
};

struct VSource {
    int row = -1, col = -1;
    int inject, sense;
    double value;
};

struct ISource {
    int row;
    int inject;
    double value;
};

// Row drive as actually imposed after limit handling.
struct EffectiveDrive {
    bool is_voltage = true;
    double value = 0.0;
    int sense_node = -1;  // raw node
    bool limited = false;
};

// Assembled system for one set of effective drives.
class Mna {
public:
    Mna(const NetworkDescription& net, const DeviceParams& p, const SolverOptions& opt,
        const std::vector<EffectiveDrive>& drives);

    int unknowns() const { return k_ + static_cast<int>(vs_.size()); }
    bool newton(Eigen::VectorXd& x, double scale, int& iterations);
    void fill(const Eigen::VectorXd& x, double scale, OperatingPoint& op) const;
    Eigen::VectorXd initial(const OperatingPoint* guess) const;

private:
    double node_v(const Eigen::VectorXd& x, int cls) const { return cls < 0 ? 0.0 : x[cls]; }
    double device_i(const Device& d, double v) const {
        if (!std::isnan(d.fixed_g)) return d.fixed_g * v;
        return device_current(v, net_.states[d.cell], p_);
    }
    // residual f, per-equation current scale and rounding floor at x
    void residual(const Eigen::VectorXd& x, double scale, Eigen::VectorXd& f,
                  Eigen::VectorXd& mag, Eigen::VectorXd& noise,
                  std::vector<double>* slopes) const;

    const NetworkDescription& net_;
    const DeviceParams& p_;
    const SolverOptions& opt_;
    std::vector<int> cls_;  // raw node -> class
    int k_ = 0;
    std::vector<Conductor> lin_;
    std::vector<Device> dev_;
    std::vector<VSource> vs_;
    std::vector<ISource> is_;
    double max_scaled_ = 0.0;

public:
    double max_scaled() const { return max_scaled_; }
};

Mna::Mna(const NetworkDescription& net, const DeviceParams& p, const SolverOptions& opt,
         const std::vector<EffectiveDrive>& drives)
    : net_(net), p_(p), opt_(opt) {
    const int n = net.node_count();
    UnionFind uf(n);
    for (const auto& b : net.branches) {
        if (b.kind != BranchKind::Memristor && b.r == 0.0) uf.unite(b.a, b.b);
    }
    cls_.assign(n, -1);
    std::vector<int> root_cls(n, -1);
    for (int i = 1; i < n; ++i) {
        const int r = uf.find(i);
        if (r == 0) continue;
        if (root_cls[r] < 0) root_cls[r] = k_++;
        cls_[i] = root_cls[r];
    }
    for (const auto& b : net.branches) {
        const int ca = cls_[b.a], cb = cls_[b.b];
        if (b.kind == BranchKind::Memristor) {
            dev_.push_back({b.cell, ca, cb,
                            net.fixed_conductance.empty()
                                ? std::numeric_limits<double>::quiet_NaN()
                                : net.fixed_conductance[b.cell]});
            continue;
        }
        if (b.r == 0.0 || std::isinf(b.r) || ca == cb) continue;
        lin_.push_back({ca, cb, 1.0 / b.r});
    }
    auto need = [](int cls, const std::string& what) {
        if (cls < 0) throw InconsistentDrive(what + " is shorted to ground");
        return cls;
    };
    for (int r = 0; r < net.cfg.n_rows; ++r) {
        const auto& d = drives[r];
        const int inj = need(cls_[net.driver(r)], "row driver " + std::to_string(r));
        if (d.is_voltage) {
            vs_.push_back({r, -1, inj, need(cls_[d.sense_node], "regulated node of row " +
                                                                     std::to_string(r)),
                           d.value});
        } else {
            is_.push_back({r, inj, d.value});
        }
    }
    for (int c = 0; c < net.cfg.n_cols; ++c) {
        double v = 0.0;
        switch (net.drives.cols[c]) {
            case ColumnTermination::Ground: v = 0.0; break;
            case ColumnTermination::Adc: v = net.drives.v_adc; break;
            case ColumnTermination::Vdd: v = net.drives.v_dd; break;
        }
        const int cls = need(cls_[net.termination(c)], "column termination " + std::to_string(c));
        vs_.push_back({-1, c, cls, cls, v});
    }
}

Eigen::VectorXd Mna::initial(const OperatingPoint* guess) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(unknowns());
    if (guess && static_cast<int>(guess->node_voltage.size()) == net_.node_count()) {
        for (int i = 0; i < net_.node_count(); ++i) {
            if (cls_[i] >= 0) x[cls_[i]] = guess->node_voltage[i];
        }
    }
    return x;
}

void Mna::residual(const Eigen::VectorXd& x, double scale, Eigen::VectorXd& f,
                   Eigen::VectorXd& mag, Eigen::VectorXd& noise,
                   std::vector<double>* slopes) const {
    f.setZero(unknowns());
    mag.setZero(unknowns());
    noise.setZero(unknowns());
    auto flow = [&](int a, int b, double i) {
        if (a >= 0) { f[a] += i; mag[a] += std::abs(i); }
        if (b >= 0) { f[b] -= i; mag[b] += std::abs(i); }
    };
    // a branch current taken from a node-voltage difference cannot be more
    // accurate than g * |v| * eps
    auto floor_of = [&](int a, int b, double g) {
        const double e = kRounding * g * (std::abs(node_v(x, a)) + std::abs(node_v(x, b)));
        if (a >= 0) noise[a] += e;
        if (b >= 0) noise[b] += e;
    };
    for (const auto& c : lin_) {
        flow(c.a, c.b, c.g * (node_v(x, c.a) - node_v(x, c.b)));
        floor_of(c.a, c.b, c.g);
    }
    if (slopes) slopes->assign(dev_.size(), 0.0);
    for (std::size_t k = 0; k < dev_.size(); ++k) {
        const auto& d = dev_[k];
        if (d.a == d.b) continue;
        const double v = node_v(x, d.a) - node_v(x, d.b);
        flow(d.a, d.b, device_i(d, v));
        if (slopes) {
            const double h = opt_.fd_step;
            (*slopes)[k] = std::isnan(d.fixed_g)
                               ? (device_i(d, v + h) - device_i(d, v - h)) / (2.0 * h)
                               : d.fixed_g;
            floor_of(d.a, d.b, std::abs((*slopes)[k]));
        }
    }
    for (std::size_t j = 0; j < vs_.size(); ++j) {
        const auto& s = vs_[j];
        const double i = x[k_ + static_cast<int>(j)];
        f[s.inject] -= i;
        mag[s.inject] += std::abs(i);
        f[k_ + static_cast<int>(j)] = x[s.sense] - scale * s.value;
    }
    for (const auto& s : is_) {
        f[s.inject] -= scale * s.value;
        mag[s.inject] += std::abs(scale * s.value);
    }
}

bool Mna::newton(Eigen::VectorXd& x, double scale, int& iterations) {
    const int n = unknowns();
    std::vector<Eigen::Triplet<double>> base;
    auto stamp = [&base](int a, int b, double g) {
        if (a >= 0) base.emplace_back(a, a, g);
        if (b >= 0) base.emplace_back(b, b, g);
        if (a >= 0 && b >= 0) {
            base.emplace_back(a, b, -g);
            base.emplace_back(b, a, -g);
        }
    };
    for (const auto& c : lin_) stamp(c.a, c.b, c.g);
    for (std::size_t j = 0; j < vs_.size(); ++j) {
        const int row = k_ + static_cast<int>(j);
        base.emplace_back(vs_[j].inject, row, -1.0);
        base.emplace_back(row, vs_[j].sense, 1.0);
    }

    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    bool analyzed = false;
    Eigen::VectorXd f, mag, noise;
    std::vector<double> slopes;
    double last_dv = kInf;
    for (int it = 0; it <= opt_.max_iterations; ++it) {
        residual(x, scale, f, mag, noise, &slopes);
        if (!f.allFinite()) return false;
        double worst = 0.0;
        bool ok = true;
        for (int i = 0; i < k_; ++i) {
            const double lim = opt_.residual_tol * mag[i] + opt_.residual_floor + noise[i];
            if (std::abs(f[i]) > lim) ok = false;
            if (mag[i] > 0.0) worst = std::max(worst, std::abs(f[i]) / mag[i]);
        }
        for (int i = k_; i < n; ++i) {
            if (std::abs(f[i]) > opt_.dv_tol * 1e-6) ok = false;
        }
        if (ok && last_dv <= opt_.dv_tol) {
            iterations += it;
            max_scaled_ = worst;
            return true;
        }
        if (it == opt_.max_iterations) break;

        std::vector<Eigen::Triplet<double>> trip = base;
        for (std::size_t k = 0; k < dev_.size(); ++k) {
            const auto& d = dev_[k];
            if (d.a == d.b) continue;
            const double g = slopes[k];
            if (d.a >= 0) trip.emplace_back(d.a, d.a, g);
            if (d.b >= 0) trip.emplace_back(d.b, d.b, g);
            if (d.a >= 0 && d.b >= 0) {
                trip.emplace_back(d.a, d.b, -g);
                trip.emplace_back(d.b, d.a, -g);
            }
        }
        Eigen::SparseMatrix<double> jac(n, n);
        jac.setFromTriplets(trip.begin(), trip.end());
        if (!analyzed) {
            lu.analyzePattern(jac);
            analyzed = true;
        }
        lu.factorize(jac);
        if (lu.info() != Eigen::Success)
            throw SingularMatrix("MNA matrix is singular (floating subnetwork?): " +
                                 lu.lastErrorMessage());
        Eigen::VectorXd dx = lu.solve(-f);
        if (lu.info() != Eigen::Success || !dx.allFinite())
            throw SingularMatrix("MNA solve failed");
        // only the memristor bias needs limiting; linear parts take the full step
        double dv_dev = 0.0;
        for (const auto& d : dev_) {
            if (d.a == d.b || !std::isnan(d.fixed_g)) continue;
            dv_dev = std::max(dv_dev, std::abs(node_v(dx, d.a) - node_v(dx, d.b)));
        }
        if (dv_dev > opt_.max_step) dx *= opt_.max_step / dv_dev;
        x += dx;
        last_dv = k_ > 0 ? dx.head(k_).cwiseAbs().maxCoeff() : 0.0;
    }
    iterations += opt_.max_iterations;
    return false;
}

void Mna::fill(const Eigen::VectorXd& x, double scale, OperatingPoint& op) const {
    const auto& cfg = net_.cfg;
    const int n = net_.node_count();
    op.node_voltage.assign(n, 0.0);
    for (int i = 0; i < n; ++i) op.node_voltage[i] = node_v(x, cls_[i]);
    const int cells = cfg.cells();
    op.device_voltage.assign(cells, 0.0);
    op.device_current.assign(cells, 0.0);
    for (const auto& d : dev_) {
        if (d.a == d.b) continue;
        const double v = node_v(x, d.a) - node_v(x, d.b);
        op.device_voltage[d.cell] = v;
        op.device_current[d.cell] = device_i(d, v);
    }
    // leg currents: resistive legs directly, ideal legs by KCL at the electrode
    op.row_leg_current.assign(cells, 0.0);
    op.col_leg_current.assign(cells, 0.0);
    std::vector<double> leaving(2 * cells, 0.0);  // through finite legs and the memristor
    for (int c = 0; c < cells; ++c) {
        leaving[2 * c] = op.device_current[c];
        leaving[2 * c + 1] = -op.device_current[c];
    }
    for (const auto& b : net_.branches) {
        if (b.kind != BranchKind::SwitchLeg || b.r == 0.0 || std::isinf(b.r)) continue;
        const double i = (op.node_voltage[b.a] - op.node_voltage[b.b]) / b.r;  // electrode -> line
        leaving[2 * b.cell + b.electrode] += i;
    }
    for (const auto& b : net_.branches) {
        if (b.kind != BranchKind::SwitchLeg || std::isinf(b.r)) continue;
        double i_out = 0.0;  // electrode -> line through this leg
        if (b.r == 0.0) {
            i_out = -leaving[2 * b.cell + b.electrode];
        } else {
            i_out = (op.node_voltage[b.a] - op.node_voltage[b.b]) / b.r;
        }
        if (b.leg == Throw::Row) op.row_leg_current[b.cell] -= i_out;
        if (b.leg == Throw::Column) op.col_leg_current[b.cell] += i_out;
    }
    op.drive_current.assign(cfg.n_rows, 0.0);
    op.drive_voltage.assign(cfg.n_rows, 0.0);
    op.column_current.assign(cfg.n_cols, 0.0);
    for (std::size_t j = 0; j < vs_.size(); ++j) {
        const double i = x[k_ + static_cast<int>(j)];
        if (vs_[j].row >= 0) op.drive_current[vs_[j].row] = i;
        if (vs_[j].col >= 0) op.column_current[vs_[j].col] = -i;
    }
    for (const auto& s : is_) op.drive_current[s.row] = scale * s.value;
    for (int r = 0; r < cfg.n_rows; ++r) op.drive_voltage[r] = op.node_voltage[net_.driver(r)];
}

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
}

template <class T>
void fnv_value(std::uint64_t& h, T v) {
    fnv(h, &v, sizeof v);
}

}  // namespace

void ArrayConfig::validate() const {
    if (n_rows < 1 || n_cols < 1) throw ConfigError("array needs at least one row and column");
    if (!(r_seg_row >= 0.0) || !(r_seg_col >= 0.0))
        throw ConfigError("array segment resistances must be >= 0");
    if (!ideal_switches) {
        if (!(r_switch_on > 0.0 && r_switch_off > r_switch_on))
            throw ConfigError("array switches need 0 < r_switch_on < r_switch_off");
    }
}

ArrayConfig ideal_interconnect(int n_rows, int n_cols) {
    ArrayConfig c;
    c.n_rows = n_rows;
    c.n_cols = n_cols;
    c.r_seg_row = 0.0;
    c.r_seg_col = 0.0;
    c.ideal_switches = true;
    return c;
}

const char* to_string(CellMode m) {
    switch (m) {
        case CellMode::GroundedBoth: return "grounded";
        case CellMode::VoltageWriteAE: return "vwrite_ae";
        case CellMode::VoltageWriteOE: return "vwrite_oe";
        case CellMode::CurrentWrite: return "iwrite";
        case CellMode::Read: return "read";
        case CellMode::HalfSelect: return "half_select";
    }
    return "?";
}

Throw ae_throw(CellMode m) {
    switch (m) {
        case CellMode::VoltageWriteAE:
        case CellMode::Read:
        case CellMode::HalfSelect: return Throw::Row;
        default: return Throw::Ground;
    }
}

Throw oe_throw(CellMode m) {
    switch (m) {
        case CellMode::VoltageWriteOE:
        case CellMode::CurrentWrite: return Throw::Row;
        case CellMode::Read:
        case CellMode::HalfSelect: return Throw::Column;
        default: return Throw::Ground;
    }
}

RowDrive RowDrive::voltage(double v, double compliance, int sense_col) {
    RowDrive d;
    d.kind = RowDriveKind::Voltage;
    d.value = v;
    d.compliance = compliance;
    d.sense_col = sense_col;
    return d;
}

RowDrive RowDrive::current(double i, double headroom) {
    RowDrive d;
    d.kind = RowDriveKind::Current;
    d.value = i;
    d.headroom = headroom;
    return d;
}

DriveSet DriveSet::idle(const ArrayConfig& cfg) {
    DriveSet d;
    d.rows.assign(cfg.n_rows, RowDrive::grounded());
    d.cols.assign(cfg.n_cols, ColumnTermination::Adc);
    return d;
}

int NetworkDescription::count(BranchKind k) const {
    return static_cast<int>(
        std::count_if(branches.begin(), branches.end(), [k](const Branch& b) { return b.kind == k; }));
}

int NetworkDescription::row_sources() const {
    return static_cast<int>(std::count_if(drives.rows.begin(), drives.rows.end(), [](const RowDrive& d) {
        return d.kind != RowDriveKind::Grounded;
    }));
}

NetworkDescription build_network(const ArrayConfig& cfg, const std::vector<CellMode>& modes,
                                 const DriveSet& drives, const std::vector<DeviceState>& states,
                                 const std::vector<double>& fixed_conductance) {
    cfg.validate();
    const int cells = cfg.cells();
    if (static_cast<int>(modes.size()) != cells || static_cast<int>(states.size()) != cells)
        throw InconsistentDrive("mode/state grid does not match the array size");
    if (static_cast<int>(drives.rows.size()) != cfg.n_rows ||
        static_cast<int>(drives.cols.size()) != cfg.n_cols)
        throw InconsistentDrive("drive set does not match the array size");
    if (!fixed_conductance.empty() && static_cast<int>(fixed_conductance.size()) != cells)
        throw InconsistentDrive("fixed conductance list does not match the array size");

    for (int r = 0; r < cfg.n_rows; ++r) {
        const RowDrive& d = drives.rows[r];
        if (!std::isfinite(d.value)) throw InconsistentDrive("row " + std::to_string(r) + " drive value");
        for (int c = 0; c < cfg.n_cols; ++c) {
            const CellMode m = modes[cfg.index(r, c)];
            const bool vwrite = m == CellMode::VoltageWriteAE || m == CellMode::VoltageWriteOE;
            if (d.kind == RowDriveKind::Current && vwrite)
                throw InconsistentDrive("row " + std::to_string(r) +
                                        ": current drive on a voltage-write cell");
            if (d.kind == RowDriveKind::Voltage && m == CellMode::CurrentWrite)
                throw InconsistentDrive("row " + std::to_string(r) +
                                        ": voltage drive on a current-write cell");
        }
        if (d.sense_col != -1) {
            if (d.kind != RowDriveKind::Voltage || d.sense_col < 0 || d.sense_col >= cfg.n_cols)
                throw InconsistentDrive("row " + std::to_string(r) + ": bad sense column");
            const CellMode m = modes[cfg.index(r, d.sense_col)];
            if (ae_throw(m) != Throw::Row && oe_throw(m) != Throw::Row)
                throw InconsistentDrive("row " + std::to_string(r) +
                                        ": sensed cell is not connected to the row");
        }
        if (d.kind == RowDriveKind::Voltage && !(d.compliance > 0.0))
            throw InconsistentDrive("row " + std::to_string(r) + ": compliance must be > 0");
        if (d.kind == RowDriveKind::Current && !(d.headroom > 0.0))
            throw InconsistentDrive("row " + std::to_string(r) + ": headroom must be > 0");
    }

    NetworkDescription net;
    net.cfg = cfg;
    net.modes = modes;
    net.drives = drives;
    net.states = states;
    net.fixed_conductance = fixed_conductance;

    net.node_names.resize(net.node_count());
    net.node_names[0] = "gnd";
    for (int r = 0; r < cfg.n_rows; ++r) {
        for (int c = 0; c < cfg.n_cols; ++c) {
            const int k = cfg.index(r, c);
            net.node_names[net.ae(k)] = cell_name("AE", r, c);
            net.node_names[net.oe(k)] = cell_name("OE", r, c);
            net.node_names[net.row_tap(k)] = cell_name("RL", r, c);
            net.node_names[net.col_tap(k)] = cell_name("CL", r, c);
        }
        net.node_names[net.driver(r)] = "RD_" + std::to_string(r);
    }
    for (int c = 0; c < cfg.n_cols; ++c) net.node_names[net.termination(c)] = "CT_" + std::to_string(c);

    for (int r = 0; r < cfg.n_rows; ++r) {
        int prev = net.driver(r);
        for (int c = 0; c < cfg.n_cols; ++c) {
            const int tap = net.row_tap(cfg.index(r, c));
            net.branches.push_back({BranchKind::RowWire, prev, tap, cfg.r_seg_row});
            prev = tap;
        }
    }
    for (int c = 0; c < cfg.n_cols; ++c) {
        for (int r = 0; r < cfg.n_rows; ++r) {
            const int tap = net.col_tap(cfg.index(r, c));
            const int next = r + 1 < cfg.n_rows ? net.col_tap(cfg.index(r + 1, c)) : net.termination(c);
            net.branches.push_back({BranchKind::ColumnWire, tap, next, cfg.r_seg_col});
        }
    }
    for (int k = 0; k < cells; ++k) {
        const CellMode m = modes[k];
        auto leg = [&](int electrode, Throw t, bool on) {
            const int node = electrode == 0 ? net.ae(k) : net.oe(k);
            const int other = t == Throw::Ground ? 0 : t == Throw::Row ? net.row_tap(k) : net.col_tap(k);
            double r = on ? cfg.r_switch_on : cfg.r_switch_off;
            if (cfg.ideal_switches) r = on ? 0.0 : kInf;
            Branch b{BranchKind::SwitchLeg, node, other, r, k, electrode, t, on};
            net.branches.push_back(b);
        };
        for (Throw t : {Throw::Ground, Throw::Row}) leg(0, t, ae_throw(m) == t);
        for (Throw t : {Throw::Ground, Throw::Row, Throw::Column}) leg(1, t, oe_throw(m) == t);
        net.branches.push_back({BranchKind::Memristor, net.ae(k), net.oe(k), 0.0, k});
    }
    return net;
}

std::uint64_t structural_hash(const NetworkDescription& net) {
    std::uint64_t h = 14695981039346656037ull;
    fnv_value(h, net.cfg.n_rows);
    fnv_value(h, net.cfg.n_cols);
    for (const auto& name : net.node_names) fnv(h, name.data(), name.size() + 1);
    for (const auto& b : net.branches) {
        fnv_value(h, static_cast<int>(b.kind));
        fnv_value(h, b.a);
        fnv_value(h, b.b);
        fnv_value(h, b.r);
        fnv_value(h, b.on);
    }
    for (CellMode m : net.modes) fnv_value(h, static_cast<int>(m));
    for (const auto& d : net.drives.rows) {
        fnv_value(h, static_cast<int>(d.kind));
        fnv_value(h, d.value);
        fnv_value(h, d.compliance);
        fnv_value(h, d.headroom);
        fnv_value(h, d.sense_col);
    }
    for (auto t : net.drives.cols) fnv_value(h, static_cast<int>(t));
    fnv_value(h, net.drives.v_dd);
    fnv_value(h, net.drives.v_adc);
    return h;
}

OperatingPoint solve_operating_point(const NetworkDescription& net, const DeviceParams& p,
                                     const SolverOptions& opt, const OperatingPoint* guess) {
    const auto& cfg = net.cfg;
    std::vector<EffectiveDrive> eff(cfg.n_rows);
    for (int r = 0; r < cfg.n_rows; ++r) {
        const RowDrive& d = net.drives.rows[r];
        auto& e = eff[r];
        e.sense_node = net.driver(r);
        if (d.kind == RowDriveKind::Current) {
            e.is_voltage = false;
            e.value = d.value;
        } else {
            e.value = d.kind == RowDriveKind::Voltage ? d.value : 0.0;
            if (d.sense_col >= 0) {
                const int k = cfg.index(r, d.sense_col);
                e.sense_node = ae_throw(net.modes[k]) == Throw::Row ? net.ae(k) : net.oe(k);
            }
        }
    }

    OperatingPoint op;
    const OperatingPoint* seed = guess;
    int total_iterations = 0;
    // a converted source stays converted, so this terminates after at most n_rows passes
    for (int pass = 0; pass <= cfg.n_rows; ++pass) {
        Mna mna(net, p, opt, eff);
        Eigen::VectorXd x = mna.initial(seed);
        int steps = 0;
        if (!mna.newton(x, 1.0, total_iterations)) {
            // source stepping from a zero start
            x = mna.initial(nullptr);
            steps = opt.source_steps;
            for (int s = 1; s <= opt.source_steps; ++s) {
                const double scale = double(s) / opt.source_steps;
                if (!mna.newton(x, scale, total_iterations))
                    throw NonConvergence("operating point did not converge (source step " +
                                         std::to_string(s) + "/" +
                                         std::to_string(opt.source_steps) + ")");
            }
        }
        op = OperatingPoint{};
        mna.fill(x, 1.0, op);
        op.iterations = total_iterations;
        op.source_steps = steps;
        op.max_scaled_residual = mna.max_scaled();

        bool changed = false;
        for (int r = 0; r < cfg.n_rows; ++r) {
            const RowDrive& d = net.drives.rows[r];
            auto& e = eff[r];
            if (e.limited) continue;
            if (d.kind == RowDriveKind::Voltage && std::abs(op.drive_current[r]) > d.compliance) {
                e.is_voltage = false;
                e.value = std::copysign(d.compliance, op.drive_current[r]);
                e.limited = changed = true;
            } else if (d.kind == RowDriveKind::Current && std::abs(op.drive_voltage[r]) > d.headroom) {
                e.is_voltage = true;
                e.value = std::copysign(d.headroom, op.drive_voltage[r]);
                e.sense_node = net.driver(r);
                e.limited = changed = true;
            }
        }
        op.row_limited.assign(cfg.n_rows, false);
        for (int r = 0; r < cfg.n_rows; ++r) op.row_limited[r] = eff[r].limited;
        if (!changed) return op;
        seed = &op;
    }
    throw NonConvergence("drive limit handling did not settle");
}

VmmResult vmm(const std::vector<double>& v, const std::vector<DeviceState>& states,
              const ArrayConfig& cfg, const AdcSpec& adc, const DeviceParams& p,
              const SolverOptions& opt, const std::vector<double>& fixed_conductance) {
    if (static_cast<int>(v.size()) != cfg.n_rows)
        throw InvalidArgument("input vector length does not match the row count");
    for (double x : v) {
        if (!(x >= 0.0 && x <= adc.v_read_safe))
            throw ReadVoltageOutOfRange("VMM input " + std::to_string(x) + " V outside [0, " +
                                        std::to_string(adc.v_read_safe) + "] V");
    }
    DriveSet d = DriveSet::idle(cfg);
    for (int r = 0; r < cfg.n_rows; ++r) d.rows[r] = RowDrive::voltage(v[r]);
    const std::vector<CellMode> modes(cfg.cells(), CellMode::Read);
    const auto net = build_network(cfg, modes, d, states, fixed_conductance);
    VmmResult out;
    out.op = solve_operating_point(net, p, opt);
    out.column_current = out.op.column_current;
    for (double& i : out.column_current) {
        // solver round-off around an exactly zero column
        if (i <= 0.0 && i > -1e-15) i = 0.0;
        out.codes.push_back(adc_read(i, adc));
    }
    return out;
}

std::vector<SneakEntry> sneak_current_report(const NetworkDescription& net,
                                             const OperatingPoint& op, double threshold) {
    std::vector<SneakEntry> out;
    for (int r = 0; r < net.cfg.n_rows; ++r) {
        for (int c = 0; c < net.cfg.n_cols; ++c) {
            const int k = net.cfg.index(r, c);
            const CellMode m = net.modes[k];
            if (m != CellMode::GroundedBoth && m != CellMode::HalfSelect) continue;
            const double i = std::abs(op.device_current[k]);
            out.push_back({r, c, i, i > threshold});
        }
    }
    return out;
}

std::vector<NamedValue> node_table(const NetworkDescription& net, const OperatingPoint& op) {
    std::vector<NamedValue> out;
    for (int i = 0; i < net.node_count(); ++i) out.push_back({net.node_names[i], op.node_voltage[i]});
    return out;
}

std::vector<NamedValue> branch_table(const NetworkDescription& net, const OperatingPoint& op) {
    std::vector<NamedValue> out;
    const auto& cfg = net.cfg;
    for (int r = 0; r < cfg.n_rows; ++r) {
        for (int c = 0; c < cfg.n_cols; ++c) {
            const int k = cfg.index(r, c);
            out.push_back({cell_name("mem", r, c), op.device_current[k]});
            out.push_back({cell_name("rowleg", r, c), op.row_leg_current[k]});
            out.push_back({cell_name("colleg", r, c), op.col_leg_current[k]});
        }
    }
    for (int r = 0; r < cfg.n_rows; ++r) out.push_back({"drive_" + std::to_string(r), op.drive_current[r]});
    for (int c = 0; c < cfg.n_cols; ++c) out.push_back({"col_" + std::to_string(c), op.column_current[c]});
    return out;
}

}  // namespace regmem
