#include "recoverl/schema.hpp"

#include <cmath>

namespace recoverl {

FieldSchema::FieldSchema(std::string name, std::vector<Field> fields)
    : name_(std::move(name)), fields_(std::move(fields)) {
    for (int i = 0; i < int(fields_.size()); ++i) {
        const Field& f = fields_[std::size_t(i)];
        if (f.name.empty())
            throw ValidationError("schema '" + name_ + "': field " + std::to_string(i) + " has an empty name");
        if (!by_name_.emplace(f.name, i).second)
            throw ValidationError("schema '" + name_ + "': duplicate field name '" + f.name + "'");
        if (f.bounds && !(f.bounds->lo < f.bounds->hi))
            throw ValidationError("schema '" + name_ + "': field '" + f.name + "' has empty bounds");
    }
}

int FieldSchema::index_of(std::string_view field_name) const {
    auto it = by_name_.find(std::string(field_name));
    return it == by_name_.end() ? -1 : it->second;
}

SchemaPtr make_schema(std::string name, std::vector<Field> fields) {
    return std::make_shared<const FieldSchema>(std::move(name), std::move(fields));
}

StateVector::StateVector(std::vector<double> values, SchemaPtr schema)
    : values_(std::move(values)), schema_(std::move(schema)) {}

ActionVector::ActionVector(std::vector<double> values, SchemaPtr schema)
    : values_(std::move(values)), schema_(std::move(schema)) {}

static void check_length_and_finite(const std::vector<double>& v, const FieldSchema& s) {
    if (int(v.size()) != s.size())
        throw ValidationError("schema '" + s.name() + "': expected " + std::to_string(s.size()) +
                              " values, got " + std::to_string(v.size()));
    for (int i = 0; i < int(v.size()); ++i)
        if (!std::isfinite(v[std::size_t(i)]))
            throw ValidationError("schema '" + s.name() + "': field '" + s.field(i).name + "' is not finite");
}

StateVector validate_state(std::vector<double> values, SchemaPtr schema) {
    check_length_and_finite(values, *schema);
    return StateVector(std::move(values), std::move(schema));
}

ActionVector validate_action(std::vector<double> values, SchemaPtr schema) {
    check_length_and_finite(values, *schema);
    for (int i = 0; i < int(values.size()); ++i) {
        double v = values[std::size_t(i)];
        if (v < -1.0 || v > 1.0)
            throw ValidationError("schema '" + schema->name() + "': field '" + schema->field(i).name +
                                  "' outside [-1, 1]");
    }
    return ActionVector(std::move(values), std::move(schema));
}

} // namespace recoverl
