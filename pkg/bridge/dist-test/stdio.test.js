"use strict";
var __createBinding = (this && this.__createBinding) || (Object.create ? (function(o, m, k, k2) {
    if (k2 === undefined) k2 = k;
    var desc = Object.getOwnPropertyDescriptor(m, k);
    if (!desc || ("get" in desc ? !m.__esModule : desc.writable || desc.configurable)) {
      desc = { enumerable: true, get: function() { return m[k]; } };
    }
    Object.defineProperty(o, k2, desc);
}) : (function(o, m, k, k2) {
    if (k2 === undefined) k2 = k;
    o[k2] = m[k];
}));
var __setModuleDefault = (this && this.__setModuleDefault) || (Object.create ? (function(o, v) {
    Object.defineProperty(o, "default", { enumerable: true, value: v });
}) : function(o, v) {
    o["default"] = v;
});
var __importStar = (this && this.__importStar) || (function () {
    var ownKeys = function(o) {
        ownKeys = Object.getOwnPropertyNames || function (o) {
            var ar = [];
            for (var k in o) if (Object.prototype.hasOwnProperty.call(o, k)) ar[ar.length] = k;
            return ar;
        };
        return ownKeys(o);
    };
    return function (mod) {
        if (mod && mod.__esModule) return mod;
        var result = {};
        if (mod != null) for (var k = ownKeys(mod), i = 0; i < k.length; i++) if (k[i] !== "default") __createBinding(result, mod, k[i]);
        __setModuleDefault(result, mod);
        return result;
    };
})();
var __importDefault = (this && this.__importDefault) || function (mod) {
    return (mod && mod.__esModule) ? mod : { "default": mod };
};
Object.defineProperty(exports, "__esModule", { value: true });
const strict_1 = __importDefault(require("node:assert/strict"));
const node_test_1 = require("node:test");
const node_child_process_1 = require("node:child_process");
const path = __importStar(require("node:path"));
const SERVER = path.join(__dirname, "..", "dist", "server.js");
const MOCK = path.join(__dirname, "..", "test", "mock_repl.js");
(0, node_test_1.test)("stdio server answers one line per request, in order", async () => {
    const child = (0, node_child_process_1.spawn)("node", [SERVER, "--repl-cmd", `node ${MOCK}`]);
    const requests = [
        { cmd: "init", theorem: "demo_theorem" },
        { cmd: "apply", session: 1, state_id: 0, tactic: "intro h" },
        { cmd: "apply", session: 1, state_id: 1, tactic: "exact h" },
        { cmd: "close", session: 1 },
    ];
    const output = [];
    child.stdout.on("data", (chunk) => output.push(chunk));
    for (const request of requests) {
        child.stdin.write(JSON.stringify(request) + "\n");
    }
    child.stdin.end();
    await new Promise((resolve) => child.on("exit", () => resolve()));
    const lines = Buffer.concat(output).toString().trim().split("\n");
    strict_1.default.equal(lines.length, 4);
    const responses = lines.map((line) => JSON.parse(line));
    strict_1.default.equal(responses[0].ok, true);
    strict_1.default.equal(responses[0].state_id, 0);
    strict_1.default.equal(responses[1].proved, false);
    strict_1.default.deepEqual(responses[2], { ok: true, proved: true });
    strict_1.default.deepEqual(responses[3], { ok: true });
});
