#pragma once
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace recoverl {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FieldBounds {
    double lo = 0.0;
    double hi = 0.0;
};

struct Field {
    std::string name;
    std::string unit;  // free text, informational
    std::optional<FieldBounds> bounds;
};

// Named, ordered list of scalar fields. Field order is the vector layout.
class FieldSchema {
public:
    FieldSchema() = default;
    FieldSchema(std::string name, std::vector<Field> fields);

    const std::string& name() const { return name_; }
    int size() const { return int(fields_.size()); }
    const Field& field(int i) const { return fields_.at(std::size_t(i)); }
    const std::vector<Field>& fields() const { return fields_; }
    // -1 when absent
    int index_of(std::string_view field_name) const;

private:
    std::string name_;
    std::vector<Field> fields_;
    std::unordered_map<std::string, int> by_name_;
};

using SchemaPtr = std::shared_ptr<const FieldSchema>;

SchemaPtr make_schema(std::string name, std::vector<Field> fields);

// Value vectors carry the schema they were checked against.
class StateVector {
public:
    StateVector() = default;
    StateVector(std::vector<double> values, SchemaPtr schema);  // unchecked

    const std::vector<double>& values() const { return values_; }
    std::span<const double> span() const { return values_; }
    const FieldSchema& schema() const { return *schema_; }
    const SchemaPtr& schema_ptr() const { return schema_; }
    double operator[](int i) const { return values_[std::size_t(i)]; }
    int size() const { return int(values_.size()); }

private:
    std::vector<double> values_;
    SchemaPtr schema_;
};

class ActionVector {
public:
    ActionVector() = default;
    ActionVector(std::vector<double> values, SchemaPtr schema);  // unchecked

    const std::vector<double>& values() const { return values_; }
    std::span<const double> span() const { return values_; }
    const FieldSchema& schema() const { return *schema_; }
    const SchemaPtr& schema_ptr() const { return schema_; }
    double operator[](int i) const { return values_[std::size_t(i)]; }
    int size() const { return int(values_.size()); }

private:
    std::vector<double> values_;
    SchemaPtr schema_;
};

// Throw ValidationError on length mismatch or non-finite entries, naming the
// offending field.
StateVector validate_state(std::vector<double> values, SchemaPtr schema);
// Additionally requires every entry in [-1, 1].
ActionVector validate_action(std::vector<double> values, SchemaPtr schema);

struct Transition {
    StateVector state;
    ActionVector action;
    double reward = 0.0;
    StateVector next_state;
    int eval_flag = 1;     // validity of `state` under the eval program
    bool terminal = false; // environment termination at next_state
};

} // namespace recoverl
