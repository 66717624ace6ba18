#include "recoverl/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace recoverl {

namespace {

constexpr int kVersion = 1;

void write_value(std::ofstream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

void write_tensor(std::ofstream& out, const std::string& name, int rows, int cols, const double* data) {
    out << "tensor " << name << ' ' << rows << ' ' << cols << '\n';
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            if (j)
                out << ' ';
            write_value(out, data[std::size_t(i) * cols + j]);
        }
        out << '\n';
    }
}

void write_net(std::ofstream& out, const std::string& prefix, const Mlp& net) {
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const Linear& lin = net.layers()[l];
        std::string base = prefix + ".l" + std::to_string(l);
        write_tensor(out, base + ".w", lin.w.rows, lin.w.cols, lin.w.data.data());
        write_tensor(out, base + ".b", 1, int(lin.bias.size()), lin.bias.data());
    }
}

struct Reader {
    std::ifstream in;
    std::string path;
    int line_no = 0;

    [[noreturn]] void fail(const std::string& msg) {
        throw ValidationError("checkpoint '" + path + "' line " + std::to_string(line_no) + ": " + msg);
    }

    std::string next_line() {
        std::string line;
        if (!std::getline(in, line))
            fail("unexpected end of file");
        ++line_no;
        return line;
    }
};

void read_tensor(Reader& r, const std::string& name, int rows, int cols, double* data) {
    std::istringstream head(r.next_line());
    std::string tok, got_name;
    int got_rows = 0, got_cols = 0;
    head >> tok >> got_name >> got_rows >> got_cols;
    if (tok != "tensor" || got_name != name)
        r.fail("expected tensor '" + name + "', got '" + got_name + "'");
    if (got_rows != rows || got_cols != cols)
        r.fail("tensor '" + name + "' has shape " + std::to_string(got_rows) + "x" + std::to_string(got_cols) +
               ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    for (int i = 0; i < rows; ++i) {
        std::istringstream row(r.next_line());
        for (int j = 0; j < cols; ++j)
            if (!(row >> data[std::size_t(i) * cols + j]))
                r.fail("tensor '" + name + "' row " + std::to_string(i) + " is short");
    }
}

void read_net(Reader& r, const std::string& prefix, Mlp& net) {
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        Linear& lin = net.layers()[l];
        std::string base = prefix + ".l" + std::to_string(l);
        read_tensor(r, base + ".w", lin.w.rows, lin.w.cols, lin.w.data.data());
        read_tensor(r, base + ".b", 1, int(lin.bias.size()), lin.bias.data());
    }
    net.refresh_transposes();
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const SacState& s, const std::string& env_name) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ValidationError("cannot write checkpoint '" + path.string() + "'");
    out << "recoverl-checkpoint " << kVersion << '\n';
    out << "env " << env_name << '\n';
    out << "obs_dim " << s.obs_dim << '\n';
    out << "act_dim " << s.act_dim << '\n';
    out << "hidden";
    for (int h : s.cfg.hidden)
        out << ' ' << h;
    out << '\n';
    out << "log_alpha ";
    write_value(out, s.log_alpha);
    out << '\n';
    write_net(out, "policy", s.policy.net);
    write_net(out, "q1", s.q1);
    write_net(out, "q2", s.q2);
    write_net(out, "tq1", s.tq1);
    write_net(out, "tq2", s.tq2);
    out << "end\n";
    if (!out)
        throw ValidationError("failed writing checkpoint '" + path.string() + "'");
}

SacState load_checkpoint(const std::filesystem::path& path, const SacConfig& cfg, CheckpointMeta* meta) {
    Reader r{std::ifstream(path), path.string(), 0};
    if (!r.in)
        throw ValidationError("cannot open checkpoint '" + path.string() + "'");

    CheckpointMeta m;
    {
        std::istringstream line(r.next_line());
        std::string magic;
        int version = 0;
        line >> magic >> version;
        if (magic != "recoverl-checkpoint")
            r.fail("not a checkpoint file");
        if (version != kVersion)
            r.fail("unsupported version " + std::to_string(version));
    }
    auto read_kv = [&r](const std::string& key) {
        std::istringstream line(r.next_line());
        std::string k;
        line >> k;
        if (k != key)
            r.fail("expected '" + key + "'");
        return line;
    };
    {
        std::istringstream line = read_kv("env");
        line >> m.env_name;
    }
    {
        std::istringstream line = read_kv("obs_dim");
        line >> m.obs_dim;
    }
    {
        std::istringstream line = read_kv("act_dim");
        line >> m.act_dim;
    }
    {
        std::istringstream line = read_kv("hidden");
        int h;
        while (line >> h)
            m.hidden.push_back(h);
    }
    if (m.obs_dim <= 0 || m.act_dim <= 0)
        r.fail("bad dimensions");
    if (m.hidden != cfg.hidden)
        r.fail("hidden sizes in the file do not match the configured network");

    double log_alpha = 0.0;
    {
        std::istringstream line = read_kv("log_alpha");
        line >> log_alpha;
    }

    SacState s;
    s.cfg = cfg;
    s.obs_dim = m.obs_dim;
    s.act_dim = m.act_dim;
    std::vector<int> pdims, qdims;
    pdims.push_back(m.obs_dim);
    pdims.insert(pdims.end(), cfg.hidden.begin(), cfg.hidden.end());
    pdims.push_back(2 * m.act_dim);
    qdims.push_back(m.obs_dim + m.act_dim);
    qdims.insert(qdims.end(), cfg.hidden.begin(), cfg.hidden.end());
    qdims.push_back(1);
    s.policy = GaussianPolicy{Mlp::zeros(pdims), m.act_dim};
    s.q1 = Mlp::zeros(qdims);
    s.q2 = Mlp::zeros(qdims);
    s.tq1 = Mlp::zeros(qdims);
    s.tq2 = Mlp::zeros(qdims);
    s.log_alpha = log_alpha;
    s.target_entropy = -double(m.act_dim);

    read_net(r, "policy", s.policy.net);
    read_net(r, "q1", s.q1);
    read_net(r, "q2", s.q2);
    read_net(r, "tq1", s.tq1);
    read_net(r, "tq2", s.tq2);
    if (r.next_line() != "end")
        r.fail("missing end marker");

    s.opt_pi = Adam(s.policy.net, cfg.adam);
    s.opt_q1 = Adam(s.q1, cfg.adam);
    s.opt_q2 = Adam(s.q2, cfg.adam);
    s.opt_alpha = AdamScalar(cfg.adam);
    if (meta)
        *meta = m;
    return s;
}

} // namespace recoverl
