#include "blockrec/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace blockrec::io {

std::string render_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

namespace {

double parse_double(const std::string& s, std::size_t line = 0) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') throw ParseError("bad numeric value '" + s + "'", line);
    return v;
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, delim)) fields.push_back(field);
    return fields;
}

}  // namespace

RatingScale infer_scale(const std::vector<double>& raw_values, bool* warned_many) {
    if (raw_values.empty()) throw ParseError("cannot infer scale from empty stream");
    std::vector<double> distinct(raw_values);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (warned_many) *warned_many = distinct.size() > 20;
    if (distinct.size() < 2)
        throw ParseError("only one distinct rating value; cannot build a scale");
    return RatingScale(std::move(distinct));
}

Dataset parse_dataset(const DatasetSpec& spec) {
    std::ifstream in(spec.path);
    if (!in) throw ParseError("cannot open " + spec.path);

    std::size_t max_col = std::max({spec.col_user, spec.col_item, spec.col_rating});
    struct RawObs {
        std::uint32_t user, item;
        double value;
        std::size_t line;
    };
    std::vector<RawObs> raw;
    std::vector<std::string> user_ids, item_ids;
    std::unordered_map<std::string, std::uint32_t> user_index, item_index;
    std::vector<double> values;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no <= spec.skip_lines) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split(line, spec.delimiter);
        if (fields.size() <= max_col)
            throw ParseError("expected at least " + std::to_string(max_col + 1) + " fields",
                             line_no);
        auto intern = [](const std::string& id, std::vector<std::string>& ids,
                         std::unordered_map<std::string, std::uint32_t>& index) {
            auto [it, inserted] = index.try_emplace(id, static_cast<std::uint32_t>(ids.size()));
            if (inserted) ids.push_back(id);
            return it->second;
        };
        std::uint32_t u = intern(fields[spec.col_user], user_ids, user_index);
        std::uint32_t i = intern(fields[spec.col_item], item_ids, item_index);
        double v = parse_double(fields[spec.col_rating], line_no);
        raw.push_back({u, i, v, line_no});
        values.push_back(v);
    }
    if (raw.empty()) throw ParseError("empty dataset: " + spec.path);

    RatingScale scale = spec.scale ? *spec.scale : infer_scale(values);
    RatingsTableBuilder builder(user_ids.size(), item_ids.size(), scale);
    for (const auto& o : raw) {
        auto r = scale.index_of(o.value);
        if (!r)
            throw ParseError("rating " + render_double(o.value) + " outside declared scale",
                             o.line);
        builder.add(o.user, o.item, static_cast<std::uint16_t>(*r));
    }
    std::size_t dups = builder.n_duplicates();
    return Dataset{std::move(builder).build(), std::move(user_ids), std::move(item_ids), dups};
}

namespace {

constexpr const char* kMagic = "blockrec-model v1";

void write_doubles(std::ostream& os, const std::vector<double>& xs, std::size_t width) {
    for (std::size_t n = 0; n < xs.size(); ++n) {
        os << render_double(xs[n]);
        os << (((n + 1) % width == 0) ? '\n' : ' ');
    }
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::string token() {
        std::string t;
        if (!(in_ >> t)) throw ParseError("truncated model file");
        return t;
    }
    std::string line() {
        std::string l;
        in_ >> std::ws;
        if (!std::getline(in_, l)) throw ParseError("truncated model file");
        return l;
    }
    std::size_t count() {
        auto t = token();
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size())
            throw ParseError("bad count '" + t + "' in model file");
        return v;
    }
    double real() { return parse_double(token()); }
    std::vector<double> reals(std::size_t n) {
        std::vector<double> xs(n);
        for (auto& x : xs) x = real();
        return xs;
    }
    void expect(const std::string& want) {
        auto got = token();
        if (got != want)
            throw ParseError("model file: expected '" + want + "', got '" + got + "'");
    }

private:
    std::istream& in_;
};

}  // namespace

void save_model(const ModelFile& file, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ParseError("cannot write " + path);
    os << kMagic << '\n';
    os << "kind " << file.kind << '\n';
    os << "scale " << file.scale.size();
    for (double v : file.scale.values()) os << ' ' << render_double(v);
    os << '\n';
    os << "users " << file.user_ids.size() << '\n';
    for (const auto& id : file.user_ids) os << id << '\n';
    os << "items " << file.item_ids.size() << '\n';
    for (const auto& id : file.item_ids) os << id << '\n';

    if (file.kind == "mmsbm") {
        os << "runs " << file.mmsbm_models.size() << '\n';
        for (const auto& m : file.mmsbm_models) {
            os << "dims " << m.n_users << ' ' << m.n_items << ' ' << m.K << ' ' << m.L << ' '
               << m.n_labels << '\n';
            os << "theta\n";
            write_doubles(os, m.theta, m.K);
            os << "eta\n";
            write_doubles(os, m.eta, m.L);
            os << "q\n";
            write_doubles(os, m.q, m.L);
        }
    } else if (file.kind == "mf") {
        const auto& m = *file.mf;
        os << "mf " << m.K() << ' ' << file.user_ids.size() << ' ' << file.item_ids.size() << ' '
           << render_double(m.global_mean()) << '\n';
        os << "P\n";
        write_doubles(os, m.P(), m.K());
        os << "Q\n";
        write_doubles(os, m.Q(), m.K());
        os << "user_seen";
        for (bool b : m.user_seen()) os << ' ' << (b ? 1 : 0);
        os << "\nitem_seen";
        for (bool b : m.item_seen()) os << ' ' << (b ? 1 : 0);
        os << '\n';
    } else if (file.kind == "itemitem") {
        const auto& m = *file.itemitem;
        os << "k " << m.k() << ' ' << render_double(m.naive().global_mean()) << '\n';
        os << "item_means\n";
        write_doubles(os, m.naive().item_means(), 1);
        os << "neighbors " << file.item_ids.size() << '\n';
        for (std::size_t i = 0; i < file.item_ids.size(); ++i) {
            const auto& nbrs = m.neighbors(i);
            os << nbrs.size();
            for (const auto& [j, sim] : nbrs) os << ' ' << j << ' ' << render_double(sim);
            os << '\n';
        }
    } else if (file.kind == "naive") {
        const auto& m = *file.naive;
        os << "global_mean " << render_double(m.global_mean()) << '\n';
        os << "item_means\n";
        write_doubles(os, m.item_means(), 1);
    } else {
        throw ParseError("unknown model kind '" + file.kind + "'");
    }
    if (!os) throw ParseError("write failure on " + path);
}

ModelFile load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string magic;
    std::getline(in, magic);
    if (magic != kMagic)
        throw ParseError("unsupported model file header '" + magic + "' (want '" + kMagic + "')");

    Reader rd(in);
    ModelFile file;
    rd.expect("kind");
    file.kind = rd.token();
    rd.expect("scale");
    std::size_t n_labels = rd.count();
    file.scale = RatingScale(rd.reals(n_labels));
    rd.expect("users");
    std::size_t n_users = rd.count();
    file.user_ids.reserve(n_users);
    for (std::size_t n = 0; n < n_users; ++n) file.user_ids.push_back(rd.line());
    rd.expect("items");
    std::size_t n_items = rd.count();
    file.item_ids.reserve(n_items);
    for (std::size_t n = 0; n < n_items; ++n) file.item_ids.push_back(rd.line());

    if (file.kind == "mmsbm") {
        rd.expect("runs");
        std::size_t runs = rd.count();
        for (std::size_t run = 0; run < runs; ++run) {
            rd.expect("dims");
            std::size_t nu = rd.count(), ni = rd.count(), K = rd.count(), L = rd.count(),
                        S = rd.count();
            if (nu != n_users || ni != n_items || S != n_labels)
                throw ParseError("model dimensions disagree with header");
            mmsbm::MmsbmModel m(nu, ni, K, L, S);
            rd.expect("theta");
            m.theta = rd.reals(nu * K);
            rd.expect("eta");
            m.eta = rd.reals(ni * L);
            rd.expect("q");
            m.q = rd.reals(S * K * L);
            file.mmsbm_models.push_back(std::move(m));
        }
    } else if (file.kind == "mf") {
        rd.expect("mf");
        std::size_t K = rd.count(), nu = rd.count(), ni = rd.count();
        if (nu != n_users || ni != n_items)
            throw ParseError("model dimensions disagree with header");
        double gm = rd.real();
        rd.expect("P");
        auto P = rd.reals(nu * K);
        rd.expect("Q");
        auto Q = rd.reals(ni * K);
        rd.expect("user_seen");
        std::vector<bool> us(nu), is(ni);
        for (std::size_t n = 0; n < nu; ++n) us[n] = rd.count() != 0;
        rd.expect("item_seen");
        for (std::size_t n = 0; n < ni; ++n) is[n] = rd.count() != 0;
        file.mf.emplace(K, nu, ni, std::move(P), std::move(Q), std::move(us), std::move(is), gm);
    } else if (file.kind == "itemitem") {
        rd.expect("k");
        std::size_t k = rd.count();
        double gm = rd.real();
        rd.expect("item_means");
        auto means = rd.reals(n_items);
        rd.expect("neighbors");
        std::size_t count = rd.count();
        if (count != n_items) throw ParseError("neighbor table size disagrees with header");
        std::vector<std::vector<std::pair<std::uint32_t, double>>> nbrs(n_items);
        for (std::size_t i = 0; i < n_items; ++i) {
            std::size_t c = rd.count();
            nbrs[i].reserve(c);
            for (std::size_t n = 0; n < c; ++n) {
                std::uint32_t j = static_cast<std::uint32_t>(rd.count());
                double sim = rd.real();
                nbrs[i].emplace_back(j, sim);
            }
        }
        file.itemitem.emplace(k, std::move(nbrs),
                              baselines::NaiveModel(std::move(means), gm));
    } else if (file.kind == "naive") {
        rd.expect("global_mean");
        double gm = rd.real();
        rd.expect("item_means");
        file.naive.emplace(rd.reals(n_items), gm);
    } else {
        throw ParseError("unknown model kind '" + file.kind + "'");
    }
    return file;
}

}  // namespace blockrec::io
