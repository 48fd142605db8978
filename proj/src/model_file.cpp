#include "bffg/model_file.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "bffg/drift_registry.hpp"
#include "bffg/errors.hpp"

namespace bffg {

using nlohmann::json;

double ParamRef::resolve(const std::map<std::string, double>& theta) const
{
    if (!param)
        return value;
    const auto it = theta.find(*param);
    if (it == theta.end())
        throw ValidationError("unknown parameter \"" + *param + "\"");
    return scale * it->second + offset;
}

bool ModelSpec::operator==(const ModelSpec& o) const
{
    return parameters == o.parameters && vertices == o.vertices && prior == o.prior && edges == o.edges &&
           observations == o.observations;
}

namespace {

// Forward iterator over text that counts the newlines it steps over.
class CountingIterator {
public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char*;
    using reference = const char&;

    CountingIterator() = default;
    CountingIterator(const char* p, std::size_t* line) : p_(p), line_(line) {}

    reference operator*() const { return *p_; }
    CountingIterator& operator++()
    {
        if (*p_ == '\n')
            ++*line_;
        ++p_;
        return *this;
    }
    CountingIterator operator++(int)
    {
        CountingIterator old = *this;
        ++*this;
        return old;
    }
    bool operator==(const CountingIterator& o) const { return p_ == o.p_; }
    bool operator!=(const CountingIterator& o) const { return p_ != o.p_; }

private:
    const char* p_ = nullptr;
    std::size_t* line_ = nullptr;
};

std::string escape_pointer_token(const std::string& s)
{
    std::string out;
    for (char c : s) {
        if (c == '~')
            out += "~0";
        else if (c == '/')
            out += "~1";
        else
            out += c;
    }
    return out;
}

// Records the source line of every value, keyed by JSON pointer.
class LineRecorder : public nlohmann::json_sax<json> {
public:
    LineRecorder(const std::size_t* line, std::map<std::string, std::size_t>& out) : line_(line), out_(out) {}

    bool null() override { return value(); }
    bool boolean(bool) override { return value(); }
    bool number_integer(number_integer_t) override { return value(); }
    bool number_unsigned(number_unsigned_t) override { return value(); }
    bool number_float(number_float_t, const string_t&) override { return value(); }
    bool string(string_t&) override { return value(); }
    bool binary(binary_t&) override { return value(); }
    bool start_object(std::size_t) override { return open(false); }
    bool end_object() override { return close(); }
    bool start_array(std::size_t) override { return open(true); }
    bool end_array() override { return close(); }
    bool key(string_t& k) override
    {
        frames_.back().key = k;
        out_.emplace(frames_.back().pointer + "/" + escape_pointer_token(k), *line_);
        return true;
    }
    bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) override { return false; }

private:
    struct Frame {
        bool array = false;
        std::size_t index = 0;
        std::string key;
        std::string pointer;
    };

    std::string next_pointer()
    {
        if (frames_.empty())
            return "";
        Frame& f = frames_.back();
        if (f.array)
            return f.pointer + "/" + std::to_string(f.index++);
        return f.pointer + "/" + escape_pointer_token(f.key);
    }
    bool value()
    {
        out_.emplace(next_pointer(), *line_);
        return true;
    }
    bool open(bool array)
    {
        const std::string p = next_pointer();
        out_[p] = *line_;
        frames_.push_back(Frame{array, 0, {}, p});
        return true;
    }
    bool close()
    {
        frames_.pop_back();
        return true;
    }

    const std::size_t* line_;
    std::map<std::string, std::size_t>& out_;
    std::vector<Frame> frames_;
};

class Parser {
public:
    Parser(std::string source, std::map<std::string, std::size_t>& lines) : source_(std::move(source)), lines_(lines)
    {
    }

    [[noreturn]] void fail(const std::string& pointer, const std::string& message) const
    {
        throw ValidationError(source_ + ":" + std::to_string(line_of(pointer)) + ": " + message);
    }

    std::size_t line_of(std::string pointer) const
    {
        while (true) {
            const auto it = lines_.find(pointer);
            if (it != lines_.end())
                return it->second;
            if (pointer.empty())
                return 1;
            pointer.erase(pointer.rfind('/'));
        }
    }

    void check_keys(const json& obj, const std::string& ptr, std::initializer_list<const char*> allowed) const
    {
        if (!obj.is_object())
            fail(ptr, "expected an object");
        for (const auto& [k, v] : obj.items()) {
            bool ok = false;
            for (const char* a : allowed)
                ok = ok || k == a;
            if (!ok)
                fail(ptr + "/" + escape_pointer_token(k), "unknown key \"" + k + "\"");
        }
    }

    const json& required(const json& obj, const std::string& key, const std::string& ptr) const
    {
        if (!obj.is_object())
            fail(ptr, "expected an object");
        const auto it = obj.find(key);
        if (it == obj.end())
            fail(ptr, "missing required key \"" + key + "\"");
        return *it;
    }

    double number(const json& j, const std::string& ptr) const
    {
        if (!j.is_number())
            fail(ptr, "expected a number");
        const double v = j.get<double>();
        if (!std::isfinite(v))
            fail(ptr, "expected a finite number");
        return v;
    }

    std::size_t count(const json& j, const std::string& ptr) const
    {
        if (!j.is_number_integer() || j.get<long long>() < 0)
            fail(ptr, "expected a nonnegative integer");
        return j.get<std::size_t>();
    }

    std::string text(const json& j, const std::string& ptr) const
    {
        if (!j.is_string())
            fail(ptr, "expected a string");
        return j.get<std::string>();
    }

    ParamRef ref(const json& j, const std::string& ptr) const
    {
        ParamRef r;
        if (j.is_number()) {
            r.value = number(j, ptr);
            return r;
        }
        if (!j.is_object())
            fail(ptr, "expected a number or a parameter reference {\"param\": name}");
        check_keys(j, ptr, {"param", "scale", "offset"});
        r.param = text(required(j, "param", ptr), ptr + "/param");
        if (!parameter_names.count(*r.param))
            fail(ptr + "/param", "unknown parameter \"" + *r.param + "\"");
        if (j.contains("scale"))
            r.scale = number(j["scale"], ptr + "/scale");
        if (j.contains("offset"))
            r.offset = number(j["offset"], ptr + "/offset");
        return r;
    }

    RefVector ref_vector(const json& j, const std::string& ptr) const
    {
        if (!j.is_array())
            fail(ptr, "expected an array of numbers");
        RefVector out;
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back(ref(j[i], ptr + "/" + std::to_string(i)));
        return out;
    }

    RefMatrix ref_matrix(const json& j, const std::string& ptr) const
    {
        if (!j.is_array() || j.empty())
            fail(ptr, "expected a non-empty array of rows");
        RefMatrix out;
        for (std::size_t i = 0; i < j.size(); ++i) {
            out.push_back(ref_vector(j[i], ptr + "/" + std::to_string(i)));
            if (out.back().size() != out.front().size() || out.back().empty())
                fail(ptr + "/" + std::to_string(i), "matrix rows must be non-empty and of equal length");
        }
        return out;
    }

    ParameterSpec parameter(const json& j, const std::string& ptr) const
    {
        check_keys(j, ptr, {"name", "init", "lower", "upper", "step"});
        ParameterSpec p;
        p.name = text(required(j, "name", ptr), ptr + "/name");
        p.init = number(required(j, "init", ptr), ptr + "/init");
        p.lower = number(required(j, "lower", ptr), ptr + "/lower");
        p.upper = number(required(j, "upper", ptr), ptr + "/upper");
        p.step = number(required(j, "step", ptr), ptr + "/step");
        if (!(p.lower < p.upper))
            fail(ptr, "parameter \"" + p.name + "\": lower must be below upper");
        if (!(p.init >= p.lower && p.init <= p.upper))
            fail(ptr + "/init", "parameter \"" + p.name + "\": init outside [lower, upper]");
        if (!(p.step > 0.0))
            fail(ptr + "/step", "parameter \"" + p.name + "\": step must be positive");
        return p;
    }

    VertexSpec vertex(const json& j, const std::string& ptr) const
    {
        check_keys(j, ptr, {"id", "kind", "states", "dim"});
        VertexSpec v;
        v.id = text(required(j, "id", ptr), ptr + "/id");
        const std::string kind = text(required(j, "kind", ptr), ptr + "/kind");
        if (kind == "finite") {
            v.kind = VertexKind::finite;
            v.dim = count(required(j, "states", ptr), ptr + "/states");
        } else if (kind == "gaussian") {
            v.kind = VertexKind::gaussian;
            v.dim = count(required(j, "dim", ptr), ptr + "/dim");
        } else {
            fail(ptr + "/kind", "vertex kind must be \"finite\" or \"gaussian\"");
        }
        if (v.dim == 0)
            fail(ptr, "vertex \"" + v.id + "\" must have at least one state/dimension");
        return v;
    }

    DriftRef drift(const json& j, const std::string& ptr) const
    {
        check_keys(j, ptr, {"name", "params"});
        DriftRef d;
        d.name = text(required(j, "name", ptr), ptr + "/name");
        const auto names = drift_names();
        if (std::find(names.begin(), names.end(), d.name) == names.end())
            fail(ptr + "/name", "unknown drift \"" + d.name + "\"");
        if (j.contains("params"))
            d.params = ref_vector(j["params"], ptr + "/params");
        return d;
    }

    KernelSpec kernel(const json& j, const std::string& ptr) const
    {
        KernelSpec k;
        k.type = text(required(j, "type", ptr), ptr + "/type");
        const auto grid = [&] {
            if (j.contains("t0"))
                k.t0 = number(j["t0"], ptr + "/t0");
            k.t1 = number(required(j, "t1", ptr), ptr + "/t1");
            if (!(k.t1 > k.t0))
                fail(ptr + "/t1", "t1 must exceed t0");
            if (j.contains("steps")) {
                k.steps = count(j["steps"], ptr + "/steps");
                if (*k.steps == 0)
                    fail(ptr + "/steps", "steps must be positive");
            }
        };
        if (k.type == "finite") {
            check_keys(j, ptr, {"type", "matrix", "markov"});
            k.matrix = ref_matrix(required(j, "matrix", ptr), ptr + "/matrix");
            if (j.contains("markov")) {
                if (!j["markov"].is_boolean())
                    fail(ptr + "/markov", "expected true or false");
                k.markov = j["markov"].get<bool>();
            }
        } else if (k.type == "linear_gaussian") {
            check_keys(j, ptr, {"type", "B", "beta", "Gamma"});
            k.B = ref_matrix(required(j, "B", ptr), ptr + "/B");
            k.beta = ref_vector(required(j, "beta", ptr), ptr + "/beta");
            k.Gamma = ref_matrix(required(j, "Gamma", ptr), ptr + "/Gamma");
        } else if (k.type == "nonlinear_gaussian") {
            check_keys(j, ptr, {"type", "drift", "Gamma"});
            k.drift = drift(required(j, "drift", ptr), ptr + "/drift");
            k.Gamma = ref_matrix(required(j, "Gamma", ptr), ptr + "/Gamma");
        } else if (k.type == "sde") {
            check_keys(j, ptr, {"type", "drift", "sigma", "t0", "t1", "steps"});
            k.drift = drift(required(j, "drift", ptr), ptr + "/drift");
            k.sigma = ref_matrix(required(j, "sigma", ptr), ptr + "/sigma");
            grid();
        } else if (k.type == "linear_sde") {
            check_keys(j, ptr, {"type", "B", "beta", "sigma", "t0", "t1", "steps"});
            k.B = ref_matrix(required(j, "B", ptr), ptr + "/B");
            k.beta = ref_vector(required(j, "beta", ptr), ptr + "/beta");
            k.sigma = ref_matrix(required(j, "sigma", ptr), ptr + "/sigma");
            grid();
        } else {
            fail(ptr + "/type", "unknown kernel type \"" + k.type +
                                    "\" (expected finite, linear_gaussian, nonlinear_gaussian, sde or linear_sde)");
        }
        return k;
    }

    EdgeSpec edge(const json& j, const std::string& ptr) const
    {
        check_keys(j, ptr, {"parent", "child", "kernel", "approx"});
        EdgeSpec e;
        e.parent = text(required(j, "parent", ptr), ptr + "/parent");
        e.child = text(required(j, "child", ptr), ptr + "/child");
        if (!vertex_ids.count(e.parent))
            fail(ptr + "/parent", "unknown vertex \"" + e.parent + "\"");
        if (!vertex_ids.count(e.child))
            fail(ptr + "/child", "unknown vertex \"" + e.child + "\"");
        e.kernel = kernel(required(j, "kernel", ptr), ptr + "/kernel");
        if (j.contains("approx"))
            e.approx = kernel(j["approx"], ptr + "/approx");
        return e;
    }

    ObservationSpec observation(const json& j, const std::string& ptr) const
    {
        ObservationSpec o;
        o.id = text(required(j, "id", ptr), ptr + "/id");
        o.vertex = text(required(j, "vertex", ptr), ptr + "/vertex");
        if (!vertex_ids.count(o.vertex))
            fail(ptr + "/vertex", "unknown vertex \"" + o.vertex + "\"");
        const json& kern = required(j, "kernel", ptr);
        const std::string kptr = ptr + "/kernel";
        o.type = text(required(kern, "type", kptr), kptr + "/type");
        const json& value = required(j, "value", ptr);
        if (o.type == "finite") {
            check_keys(kern, kptr, {"type", "lambda"});
            o.lambda = ref_matrix(required(kern, "lambda", kptr), kptr + "/lambda");
            o.value = count(value, ptr + "/value");
        } else if (o.type == "gaussian") {
            check_keys(kern, kptr, {"type", "L", "Sigma"});
            o.L = ref_matrix(required(kern, "L", kptr), kptr + "/L");
            o.Sigma = ref_matrix(required(kern, "Sigma", kptr), kptr + "/Sigma");
            if (!value.is_array())
                fail(ptr + "/value", "expected an array of numbers");
            std::vector<double> v;
            for (std::size_t i = 0; i < value.size(); ++i)
                v.push_back(number(value[i], ptr + "/value/" + std::to_string(i)));
            o.value = std::move(v);
        } else {
            fail(kptr + "/type", "observation kernel type must be \"finite\" or \"gaussian\"");
        }
        check_keys(j, ptr, {"id", "vertex", "kernel", "value"});
        return o;
    }

    PriorSpec prior(const json& j, const std::string& ptr) const
    {
        PriorSpec p;
        p.type = text(required(j, "type", ptr), ptr + "/type");
        if (p.type == "finite") {
            check_keys(j, ptr, {"type", "weights"});
            p.weights = ref_vector(required(j, "weights", ptr), ptr + "/weights");
        } else if (p.type == "gaussian") {
            check_keys(j, ptr, {"type", "mean", "cov"});
            p.mean = ref_vector(required(j, "mean", ptr), ptr + "/mean");
            p.cov = ref_matrix(required(j, "cov", ptr), ptr + "/cov");
        } else if (p.type == "dirac") {
            check_keys(j, ptr, {"type", "value"});
            p.value = ref_vector(required(j, "value", ptr), ptr + "/value");
        } else {
            fail(ptr + "/type", "prior type must be \"finite\", \"gaussian\" or \"dirac\"");
        }
        return p;
    }

    std::set<std::string> parameter_names;
    std::set<std::string> vertex_ids;

private:
    std::string source_;
    std::map<std::string, std::size_t>& lines_;
};

std::size_t line_at_offset(const std::string& text, std::size_t offset)
{
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

json ref_to_json(const ParamRef& r)
{
    if (!r.param)
        return r.value;
    json j{{"param", *r.param}};
    if (r.scale != 1.0)
        j["scale"] = r.scale;
    if (r.offset != 0.0)
        j["offset"] = r.offset;
    return j;
}

json ref_to_json(const RefVector& v)
{
    json j = json::array();
    for (const ParamRef& r : v)
        j.push_back(ref_to_json(r));
    return j;
}

json ref_to_json(const RefMatrix& m)
{
    json j = json::array();
    for (const RefVector& row : m)
        j.push_back(ref_to_json(row));
    return j;
}

json kernel_to_json(const KernelSpec& k)
{
    json j{{"type", k.type}};
    const auto drift = [&] {
        json d{{"name", k.drift->name}};
        if (!k.drift->params.empty())
            d["params"] = ref_to_json(k.drift->params);
        return d;
    };
    const auto grid = [&] {
        j["t0"] = k.t0;
        j["t1"] = k.t1;
        if (k.steps)
            j["steps"] = *k.steps;
    };
    if (k.type == "finite") {
        j["matrix"] = ref_to_json(k.matrix);
        if (!k.markov)
            j["markov"] = false;
    } else if (k.type == "linear_gaussian") {
        j["B"] = ref_to_json(k.B);
        j["beta"] = ref_to_json(k.beta);
        j["Gamma"] = ref_to_json(k.Gamma);
    } else if (k.type == "nonlinear_gaussian") {
        j["drift"] = drift();
        j["Gamma"] = ref_to_json(k.Gamma);
    } else if (k.type == "sde") {
        j["drift"] = drift();
        j["sigma"] = ref_to_json(k.sigma);
        grid();
    } else {
        j["B"] = ref_to_json(k.B);
        j["beta"] = ref_to_json(k.beta);
        j["sigma"] = ref_to_json(k.sigma);
        grid();
    }
    return j;
}

// Resolution of symbolic specs at a parameter value.
struct Resolver {
    std::map<std::string, double> theta;

    Vector vec(const RefVector& v) const
    {
        Vector out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i)
            out(static_cast<Eigen::Index>(i)) = v[i].resolve(theta);
        return out;
    }
    Matrix mat(const RefMatrix& m) const
    {
        Matrix out(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m.front().size()));
        for (std::size_t i = 0; i < m.size(); ++i)
            for (std::size_t k = 0; k < m[i].size(); ++k)
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = m[i][k].resolve(theta);
        return out;
    }
    RegisteredDrift drift(const DriftRef& d) const
    {
        std::vector<double> p;
        for (const ParamRef& r : d.params)
            p.push_back(r.resolve(theta));
        return make_drift(d.name, p);
    }
};

std::size_t grid_steps(const KernelSpec& k)
{
    if (k.steps)
        return *k.steps;
    return static_cast<std::size_t>(std::max(1.0, std::ceil(100.0 * (k.t1 - k.t0) - 1e-9)));
}

Kernel build_kernel(const KernelSpec& k, const Resolver& r)
{
    if (k.type == "finite")
        return FiniteKernel(r.mat(k.matrix), k.markov);
    if (k.type == "linear_gaussian")
        return LinearGaussianKernel(r.mat(k.B), r.vec(k.beta), r.mat(k.Gamma));
    if (k.type == "nonlinear_gaussian") {
        const RegisteredDrift d = r.drift(*k.drift);
        const TimeStateDrift f = d.drift;
        return NonlinearGaussianKernel([f](const Vector& x) { return f(0.0, x); }, r.mat(k.Gamma), d.dim);
    }
    if (k.type == "sde") {
        const RegisteredDrift d = r.drift(*k.drift);
        const Matrix sigma = r.mat(k.sigma);
        if (static_cast<std::size_t>(sigma.rows()) != d.dim)
            throw ValidationError("sigma must have " + std::to_string(d.dim) + " rows for drift " + k.drift->name);
        return SdeEdgeKernel(
            d.drift, [sigma](double, const Vector&) { return sigma; }, d.dim, static_cast<std::size_t>(sigma.cols()),
            k.t0, k.t1, grid_steps(k));
    }
    return LinearSdeKernel(r.mat(k.B), r.vec(k.beta), r.mat(k.sigma), k.t0, k.t1, grid_steps(k));
}

// Auxiliary kernel for an intractable edge: the registry linearization with matching diffusivity.
Kernel default_approx(const KernelSpec& k, const Resolver& r)
{
    const RegisteredDrift d = r.drift(*k.drift);
    if (k.type == "nonlinear_gaussian")
        return LinearGaussianKernel(d.B, d.beta, r.mat(k.Gamma));
    return LinearSdeKernel(d.B, d.beta, r.mat(k.sigma), k.t0, k.t1, grid_steps(k));
}

std::string quoted_token(const std::string& message, std::size_t from = 0)
{
    const auto a = message.find('"', from);
    if (a == std::string::npos)
        return {};
    const auto b = message.find('"', a + 1);
    return b == std::string::npos ? std::string() : message.substr(a + 1, b - a - 1);
}

// JSON pointer most relevant to a tree validation message.
std::string anchor_for(const ModelSpec& spec, const std::string& message)
{
    if (message.rfind("edge \"", 0) == 0) {
        const std::string p = quoted_token(message);
        const std::string c = quoted_token(message, message.find('"', message.find('"') + 1) + 1);
        for (std::size_t i = 0; i < spec.edges.size(); ++i)
            if (spec.edges[i].parent == p && spec.edges[i].child == c)
                return "/edges/" + std::to_string(i);
        return "/edges";
    }
    if (message.rfind("observation \"", 0) == 0) {
        const std::string id = quoted_token(message);
        for (std::size_t i = 0; i < spec.observations.size(); ++i)
            if (spec.observations[i].id == id)
                return "/observations/" + std::to_string(i);
        return "/observations";
    }
    if (message.rfind("prior", 0) == 0)
        return "/prior";
    const std::string id = quoted_token(message);
    for (std::size_t i = 0; i < spec.vertices.size(); ++i)
        if (spec.vertices[i].id == id)
            return "/vertices/" + std::to_string(i);
    return "";
}

std::size_t spec_line(const ModelSpec& spec, std::string pointer)
{
    while (true) {
        const auto it = spec.lines.find(pointer);
        if (it != spec.lines.end())
            return it->second;
        if (pointer.empty())
            return 1;
        pointer.erase(pointer.rfind('/'));
    }
}

[[noreturn]] void fail_at(const ModelSpec& spec, const std::string& pointer, const std::string& message)
{
    throw ValidationError(spec.source_name + ":" + std::to_string(spec_line(spec, pointer)) + ": " + message);
}

} // namespace

ModelSpec parse_model(const std::string& text, const std::string& source_name)
{
    ModelSpec spec;
    spec.source_name = source_name;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(source_name + ":" + std::to_string(line_at_offset(text, e.byte == 0 ? 0 : e.byte - 1)) +
                              ": parse error: " + e.what());
    }
    {
        std::size_t line = 1;
        LineRecorder recorder(&line, spec.lines);
        json::sax_parse(CountingIterator(text.data(), &line), CountingIterator(text.data() + text.size(), &line),
                        &recorder);
    }

    Parser p(source_name, spec.lines);
    p.check_keys(doc, "", {"parameters", "vertices", "prior", "edges", "observations"});
    if (doc.contains("parameters")) {
        const json& ps = doc["parameters"];
        if (!ps.is_array())
            p.fail("/parameters", "expected an array");
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const std::string ptr = "/parameters/" + std::to_string(i);
            ParameterSpec param = p.parameter(ps[i], ptr);
            if (!p.parameter_names.insert(param.name).second)
                p.fail(ptr + "/name", "duplicate parameter \"" + param.name + "\"");
            spec.parameters.push_back(std::move(param));
        }
    }
    const json& vs = p.required(doc, "vertices", "");
    if (!vs.is_array() || vs.empty())
        p.fail("/vertices", "expected a non-empty array");
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const std::string ptr = "/vertices/" + std::to_string(i);
        VertexSpec v = p.vertex(vs[i], ptr);
        if (!p.vertex_ids.insert(v.id).second)
            p.fail(ptr + "/id", "duplicate vertex id \"" + v.id + "\"");
        spec.vertices.push_back(std::move(v));
    }
    spec.prior = p.prior(p.required(doc, "prior", ""), "/prior");
    if (doc.contains("edges")) {
        const json& es = doc["edges"];
        if (!es.is_array())
            p.fail("/edges", "expected an array");
        for (std::size_t i = 0; i < es.size(); ++i)
            spec.edges.push_back(p.edge(es[i], "/edges/" + std::to_string(i)));
    }
    const json& os = p.required(doc, "observations", "");
    if (!os.is_array())
        p.fail("/observations", "expected an array");
    std::set<std::string> obs_ids;
    for (std::size_t i = 0; i < os.size(); ++i) {
        const std::string ptr = "/observations/" + std::to_string(i);
        spec.observations.push_back(p.observation(os[i], ptr));
        if (!obs_ids.insert(spec.observations.back().id).second)
            p.fail(ptr + "/id", "duplicate observation id \"" + spec.observations.back().id + "\"");
    }
    return spec;
}

ModelSpec load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError(path + ": cannot open file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str(), path);
}

json to_json(const ModelSpec& spec)
{
    json j;
    j["parameters"] = json::array();
    for (const ParameterSpec& p : spec.parameters)
        j["parameters"].push_back(
            {{"name", p.name}, {"init", p.init}, {"lower", p.lower}, {"upper", p.upper}, {"step", p.step}});
    j["vertices"] = json::array();
    for (const VertexSpec& v : spec.vertices) {
        if (v.kind == VertexKind::finite)
            j["vertices"].push_back({{"id", v.id}, {"kind", "finite"}, {"states", v.dim}});
        else
            j["vertices"].push_back({{"id", v.id}, {"kind", "gaussian"}, {"dim", v.dim}});
    }
    json prior{{"type", spec.prior.type}};
    if (spec.prior.type == "finite") {
        prior["weights"] = ref_to_json(spec.prior.weights);
    } else if (spec.prior.type == "gaussian") {
        prior["mean"] = ref_to_json(spec.prior.mean);
        prior["cov"] = ref_to_json(spec.prior.cov);
    } else {
        prior["value"] = ref_to_json(spec.prior.value);
    }
    j["prior"] = prior;
    j["edges"] = json::array();
    for (const EdgeSpec& e : spec.edges) {
        json je{{"parent", e.parent}, {"child", e.child}, {"kernel", kernel_to_json(e.kernel)}};
        if (e.approx)
            je["approx"] = kernel_to_json(*e.approx);
        j["edges"].push_back(je);
    }
    j["observations"] = json::array();
    for (const ObservationSpec& o : spec.observations) {
        json jo{{"id", o.id}, {"vertex", o.vertex}};
        if (o.type == "finite") {
            jo["kernel"] = {{"type", "finite"}, {"lambda", ref_to_json(o.lambda)}};
            jo["value"] = std::get<std::size_t>(o.value);
        } else {
            jo["kernel"] = {{"type", "gaussian"}, {"L", ref_to_json(o.L)}, {"Sigma", ref_to_json(o.Sigma)}};
            jo["value"] = std::get<std::vector<double>>(o.value);
        }
        j["observations"].push_back(jo);
    }
    return j;
}

Vector initial_theta(const ModelSpec& spec)
{
    Vector t(static_cast<Eigen::Index>(spec.parameters.size()));
    for (std::size_t i = 0; i < spec.parameters.size(); ++i)
        t(static_cast<Eigen::Index>(i)) = spec.parameters[i].init;
    return t;
}

ParamSpace param_space(const ModelSpec& spec)
{
    const auto n = static_cast<Eigen::Index>(spec.parameters.size());
    ParamSpace s;
    s.theta = initial_theta(spec);
    s.lower.resize(n);
    s.upper.resize(n);
    s.step.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const ParameterSpec& p = spec.parameters[static_cast<std::size_t>(i)];
        s.names.push_back(p.name);
        s.lower(i) = p.lower;
        s.upper(i) = p.upper;
        s.step(i) = p.step;
    }
    return s;
}

TreeModel instantiate(const ModelSpec& spec, const Vector& theta)
{
    if (theta.size() != static_cast<Eigen::Index>(spec.parameters.size()))
        throw ValidationError("expected " + std::to_string(spec.parameters.size()) + " parameter values, got " +
                              std::to_string(theta.size()));
    Resolver r;
    for (std::size_t i = 0; i < spec.parameters.size(); ++i)
        r.theta[spec.parameters[i].name] = theta(static_cast<Eigen::Index>(i));

    std::map<std::string, std::size_t> index;
    std::vector<Vertex> vertices;
    for (const VertexSpec& v : spec.vertices) {
        index[v.id] = vertices.size();
        vertices.push_back(Vertex{v.id, v.kind, v.dim});
    }

    std::vector<Edge> edges;
    for (std::size_t i = 0; i < spec.edges.size(); ++i) {
        const EdgeSpec& e = spec.edges[i];
        const std::string ptr = "/edges/" + std::to_string(i);
        try {
            Edge edge{index.at(e.parent), index.at(e.child), build_kernel(e.kernel, r), std::nullopt};
            if (e.approx)
                edge.approx = build_kernel(*e.approx, r);
            else if (e.kernel.type == "sde" || e.kernel.type == "nonlinear_gaussian")
                edge.approx = default_approx(e.kernel, r);
            edges.push_back(std::move(edge));
        } catch (const Error& err) {
            fail_at(spec, ptr, "edge \"" + e.parent + "\" -> \"" + e.child + "\": " + err.what());
        }
    }

    std::vector<Observation> observations;
    for (std::size_t i = 0; i < spec.observations.size(); ++i) {
        const ObservationSpec& o = spec.observations[i];
        try {
            if (o.type == "finite") {
                observations.push_back(Observation{o.id, index.at(o.vertex), FiniteObservation(r.mat(o.lambda)),
                                                   std::get<std::size_t>(o.value)});
            } else {
                const auto& v = std::get<std::vector<double>>(o.value);
                observations.push_back(Observation{o.id, index.at(o.vertex),
                                                   GaussianObservation(r.mat(o.L), r.mat(o.Sigma)),
                                                   Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())))});
            }
        } catch (const Error& err) {
            fail_at(spec, "/observations/" + std::to_string(i), "observation \"" + o.id + "\": " + err.what());
        }
    }

    RootPrior prior;
    if (spec.prior.type == "finite")
        prior = FinitePrior{r.vec(spec.prior.weights)};
    else if (spec.prior.type == "gaussian")
        prior = GaussianPrior{r.vec(spec.prior.mean), r.mat(spec.prior.cov)};
    else
        prior = DiracPrior{r.vec(spec.prior.value)};

    try {
        return TreeModel(std::move(vertices), std::move(edges), std::move(observations), std::move(prior));
    } catch (const Error& err) {
        fail_at(spec, anchor_for(spec, err.what()), err.what());
    }
}

ModelBuilder model_builder(const ModelSpec& spec)
{
    return [spec](const Vector& theta) { return instantiate(spec, theta); };
}

} // namespace bffg
