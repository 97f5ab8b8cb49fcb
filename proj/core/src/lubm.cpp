#include "omqa/lubm.hpp"

#include <string>
#include <vector>

#include "omqa/rng.hpp"

namespace omqa {

namespace {

struct Builder {
    SymbolTable& st;
    std::vector<Triple> out;

    void fact(NodeId h, std::string_view r, NodeId t) { out.push_back({h, st.relation(r), t}); }
    void type(NodeId e, std::string_view c) { out.push_back({e, kTypeRel, st.concept_id(c)}); }
};

constexpr std::string_view kRelations[] = {
    "subOrganizationOf", "worksFor",  "memberOf",         "headOf",
    "teacherOf",         "takesCourse", "advisor",        "degreeFrom",
    "undergraduateDegreeFrom", "mastersDegreeFrom", "doctoralDegreeFrom", "hasAlumnus",
    "publicationAuthor", "teachingAssistantOf",
};

constexpr std::string_view kConcepts[] = {
    "University", "Department", "FullProfessor", "AssociateProfessor", "AssistantProfessor",
    "Professor",  "Lecturer",   "Faculty",       "UndergraduateStudent", "GraduateStudent",
    "Student",    "Course",     "GraduateCourse", "Publication",
};

std::vector<Axiom> lubm_axioms(const SymbolTable& st) {
    auto c = [&](std::string_view n) { return st.concept_id(n); };
    auto r = [&](std::string_view n) { return st.relation(n); };
    return {
        Axiom::sub_concept(c("FullProfessor"), c("Professor")),
        Axiom::sub_concept(c("AssociateProfessor"), c("Professor")),
        Axiom::sub_concept(c("AssistantProfessor"), c("Professor")),
        Axiom::sub_concept(c("Professor"), c("Faculty")),
        Axiom::sub_concept(c("Lecturer"), c("Faculty")),
        Axiom::sub_concept(c("UndergraduateStudent"), c("Student")),
        Axiom::sub_concept(c("GraduateStudent"), c("Student")),
        Axiom::sub_role(r("headOf"), r("worksFor")),
        Axiom::sub_role(r("worksFor"), r("memberOf")),
        Axiom::sub_role(r("undergraduateDegreeFrom"), r("degreeFrom")),
        Axiom::sub_role(r("mastersDegreeFrom"), r("degreeFrom")),
        Axiom::sub_role(r("doctoralDegreeFrom"), r("degreeFrom")),
        // degreeFrom ≡ hasAlumnus⁻
        Axiom::inv_sub_role(r("degreeFrom"), r("hasAlumnus")),
        Axiom::inv_sub_role(r("hasAlumnus"), r("degreeFrom")),
        Axiom::range(r("teacherOf"), c("Course")),
        Axiom::domain(r("takesCourse"), c("Student")),
        Axiom::range(r("advisor"), c("Professor")),
        Axiom::range(r("degreeFrom"), c("University")),
    };
}

}  // namespace

LubmData generate_lubm(const LubmOptions& opt, std::uint64_t seed) {
    auto st = std::make_shared<SymbolTable>();
    for (auto r : kRelations) st->intern_relation(r);
    for (auto c : kConcepts) st->intern_concept(c);
    Rng rng = Rng::stream(seed, "lubm");
    Builder b{*st, {}};

    const std::size_t nu = opt.universities + opt.external_universities;
    std::vector<NodeId> univ;
    for (std::size_t u = 0; u < nu; ++u) {
        univ.push_back(st->intern_entity("u" + std::to_string(u)));
        b.type(univ.back(), "University");
    }
    auto any_univ = [&] { return univ[rng.index(univ.size())]; };
    auto pick = [&](const std::vector<NodeId>& v) { return v[rng.index(v.size())]; };

    for (std::size_t u = 0; u < opt.universities; ++u) {
        for (std::size_t di = 0; di < opt.departments; ++di) {
            const std::string pre = "u" + std::to_string(u) + "_d" + std::to_string(di) + "_";
            NodeId dept = st->intern_entity(pre.substr(0, pre.size() - 1));
            b.type(dept, "Department");
            b.fact(dept, "subOrganizationOf", univ[u]);

            std::vector<NodeId> courses, grad_courses;
            for (std::size_t i = 0; i < opt.courses; ++i) {
                courses.push_back(st->intern_entity(pre + "c" + std::to_string(i)));
                b.type(courses.back(), "Course");
            }
            for (std::size_t i = 0; i < opt.graduate_courses; ++i) {
                grad_courses.push_back(st->intern_entity(pre + "gc" + std::to_string(i)));
                b.type(grad_courses.back(), "GraduateCourse");
            }

            std::vector<NodeId> profs, faculty;
            auto hire = [&](const std::string& tag, std::size_t i, std::string_view cls, bool professor) {
                NodeId f = st->intern_entity(pre + tag + std::to_string(i));
                b.type(f, cls);
                b.fact(f, "undergraduateDegreeFrom", any_univ());
                b.fact(f, "mastersDegreeFrom", any_univ());
                if (professor) {
                    b.fact(f, "doctoralDegreeFrom", any_univ());
                    profs.push_back(f);
                }
                faculty.push_back(f);
                return f;
            };
            NodeId chair = hire("chair", 0, "FullProfessor", true);
            b.fact(chair, "headOf", dept);  // worksFor is entailed
            for (std::size_t i = 0; i < opt.full_professors; ++i) hire("fp", i, "FullProfessor", true);
            for (std::size_t i = 0; i < opt.associate_professors; ++i) hire("ap", i, "AssociateProfessor", true);
            for (std::size_t i = 0; i < opt.assistant_professors; ++i) hire("sp", i, "AssistantProfessor", true);
            for (std::size_t i = 0; i < opt.lecturers; ++i) hire("lc", i, "Lecturer", false);
            for (NodeId f : faculty) {
                if (f != chair) b.fact(f, "worksFor", dept);
            }
            // every course has one teacher; graduate courses go to professors
            for (NodeId c : courses) b.fact(pick(faculty), "teacherOf", c);
            for (NodeId c : grad_courses) b.fact(pick(profs), "teacherOf", c);

            for (std::size_t i = 0; i < opt.undergraduate_students; ++i) {
                NodeId s = st->intern_entity(pre + "ug" + std::to_string(i));
                b.type(s, "UndergraduateStudent");
                b.fact(s, "memberOf", dept);
                const std::size_t k = 2 + rng.index(2);
                for (std::size_t j = 0; j < k; ++j) b.fact(s, "takesCourse", pick(courses));
                if (rng.uniform() < 0.3) b.fact(s, "advisor", pick(profs));
            }
            std::vector<NodeId> grads;
            for (std::size_t i = 0; i < opt.graduate_students; ++i) {
                NodeId s = st->intern_entity(pre + "gs" + std::to_string(i));
                grads.push_back(s);
                b.type(s, "GraduateStudent");
                b.fact(s, "memberOf", dept);
                b.fact(s, "undergraduateDegreeFrom", any_univ());
                const std::size_t k = 1 + rng.index(2);
                for (std::size_t j = 0; j < k; ++j) b.fact(s, "takesCourse", pick(grad_courses));
                b.fact(s, "advisor", pick(profs));
                if (rng.uniform() < 0.4) b.fact(s, "teachingAssistantOf", pick(courses));
            }
            for (std::size_t i = 0; i < opt.publications; ++i) {
                NodeId p = st->intern_entity(pre + "pub" + std::to_string(i));
                b.type(p, "Publication");
                b.fact(p, "publicationAuthor", pick(profs));
                if (rng.uniform() < 0.5) b.fact(p, "publicationAuthor", pick(grads.empty() ? faculty : grads));
            }
        }
    }
    // duplicates (e.g. a course drawn twice) collapse in the graph constructor
    KnowledgeGraph g(st, std::move(b.out));
    Ontology o(st, lubm_axioms(*st));
    return {st, std::move(g), std::move(o)};
}

}  // namespace omqa
