#pragma once

#include <cstdint>
#include <memory>

#include "omqa/kg.hpp"
#include "omqa/ontology.hpp"

namespace omqa {

// Small university-domain generator in the style of LUBM. The raw graph keeps
// only the most specific facts (leaf classes, headOf, the three degree
// sub-properties); worksFor-by-chairs, memberOf-by-staff, degreeFrom,
// hasAlumnus and every super-class are left for the ontology to entail.
struct LubmOptions {
    std::size_t universities = 3;           // with departments
    std::size_t external_universities = 3;  // degree targets only
    std::size_t departments = 4;            // per university
    std::size_t full_professors = 2;        // per department, besides the chair
    std::size_t associate_professors = 2;
    std::size_t assistant_professors = 2;
    std::size_t lecturers = 1;
    std::size_t undergraduate_students = 12;
    std::size_t graduate_students = 5;
    std::size_t courses = 4;
    std::size_t graduate_courses = 2;
    std::size_t publications = 8;
};

struct LubmData {
    std::shared_ptr<SymbolTable> symbols;
    KnowledgeGraph graph;
    Ontology ontology;
};

LubmData generate_lubm(const LubmOptions& opt, std::uint64_t seed);

}  // namespace omqa
