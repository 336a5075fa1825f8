#pragma once

// HTTP binding of AnnotationService (JSON over HTTP).
//
//   GET  /api/queue?source=nn|logit    next unlabeled director for the coder
//   GET  /api/directors/{id}           ego network, features, flags, labels
//   POST /api/labels                   {director_id, coder_id, score, notes}
//   GET  /api/estimate                 posterior summaries
//   GET  /api/export/positives         reconciled CSP director ids
//   GET  /api/codebook                 scoring guide (markdown)
//
// The coder is identified by the X-Coder-Id header.

#include <string>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "nomscreen/annotation.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace nomscreen {

inline constexpr const char* kCoderHeader = "X-Coder-Id";

inline void install_routes(httplib::Server& srv, AnnotationService& svc) {
    auto send = [](httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    };
    auto guarded = [send](auto fn) {
        return [fn, send](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const Error& e) {
                send(res, 400, {{"error", e.what()}});
            } catch (const nlohmann::json::exception& e) {
                send(res, 400, {{"error", e.what()}});
            }
        };
    };

    srv.Get("/api/queue", guarded([&svc, send](const httplib::Request& req, httplib::Response& res) {
        auto coder = req.get_header_value(kCoderHeader);
        if (coder.empty()) throw Error("missing X-Coder-Id header");
        auto source = parse_source(req.has_param("source") ? req.get_param_value("source") : "nn");
        send(res, 200, svc.queue_json(source, coder));
    }));

    srv.Get(R"(/api/directors/([^/]+))", guarded([&svc, send](const httplib::Request& req, httplib::Response& res) {
        auto p = svc.director(req.matches[1]);
        if (!p) return send(res, 404, {{"error", "unknown director"}});
        send(res, 200, *p);
    }));

    srv.Post("/api/labels", guarded([&svc, send](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        auto coder = req.get_header_value(kCoderHeader);
        auto ack = svc.submit(body, coder.empty() ? std::nullopt : std::optional<std::string>(coder));
        ack["estimate"] = svc.estimate();
        send(res, 200, ack);
    }));

    srv.Get("/api/estimate", guarded([&svc, send](const httplib::Request&, httplib::Response& res) {
        send(res, 200, svc.estimate());
    }));

    srv.Get("/api/export/positives", guarded([&svc, send](const httplib::Request&, httplib::Response& res) {
        send(res, 200, svc.export_positives());
    }));

    srv.Get("/api/codebook", [&svc](const httplib::Request&, httplib::Response& res) {
        res.set_content(svc.codebook(), "text/markdown; charset=utf-8");
    });
}

} // namespace nomscreen
