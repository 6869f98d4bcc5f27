import json
import subprocess
import sys


WORKER_CMD = [sys.executable, "-m", "peftbo_worker", "--max-steps", "40"]


def _request(i, layers=(1,), d_sa=2, d_pa=0, l_pt=0, fidelity=0.1, seed=0):
    return {
        "id": str(i),
        "config": {"layers": list(layers), "d_sa": d_sa, "d_pa": d_pa, "l_pt": l_pt},
        "fidelity": fidelity,
        "seed": seed,
    }


def _talk(lines, timeout=120):
    proc = subprocess.run(
        WORKER_CMD,
        input="\n".join(lines) + "\n",
        capture_output=True,
        text=True,
        timeout=timeout,
    )
    return proc


class TestProtocol:
    def test_roundtrip_and_order_preserved(self):
        requests = [_request(i, layers=(1,), d_sa=i + 1) for i in range(4)]
        proc = _talk([json.dumps(r) for r in requests])
        assert proc.returncode == 0
        responses = [json.loads(l) for l in proc.stdout.splitlines()]
        assert [r["id"] for r in responses] == [str(i) for i in range(4)]
        for r in responses:
            assert "score" in r and "error" not in r
            assert 0.0 <= r["score"] <= 100.0

    def test_stdout_carries_only_responses(self):
        proc = _talk([json.dumps(_request(0))])
        for line in proc.stdout.splitlines():
            record = json.loads(line)  # every stdout line is a JSON response
            assert "id" in record

    def test_malformed_line_gets_unknown_id_error(self):
        proc = _talk(["{this is not json", json.dumps(_request(7))])
        responses = [json.loads(l) for l in proc.stdout.splitlines()]
        assert len(responses) == 2
        assert responses[0]["id"] == "unknown"
        assert "error" in responses[0]
        # worker stays alive and answers the next request
        assert responses[1]["id"] == "7"
        assert "score" in responses[1]

    def test_bad_fields_echo_id(self):
        bad = {"id": "9", "config": {"layers": [1], "d_sa": -3, "d_pa": 0, "l_pt": 0},
               "fidelity": 0.1, "seed": 0}
        proc = _talk([json.dumps(bad)])
        response = json.loads(proc.stdout.splitlines()[0])
        assert response["id"] == "9"
        assert "error" in response and "score" not in response

    def test_empty_config_scores_untrained_baseline(self):
        req = _request(3, layers=(), d_sa=0, d_pa=0, l_pt=0)
        proc = _talk([json.dumps(req)])
        response = json.loads(proc.stdout.splitlines()[0])
        assert response["trainable_params"] == 0
        assert response["score"] >= 0.0

    def test_determinism_across_processes(self):
        req = json.dumps(_request(1, layers=(1, 2), d_sa=4, d_pa=2, l_pt=1, seed=5))
        a = json.loads(_talk([req]).stdout.splitlines()[0])
        b = json.loads(_talk([req]).stdout.splitlines()[0])
        assert a == b

    def test_eof_exits_cleanly(self):
        proc = subprocess.run(
            WORKER_CMD, input="", capture_output=True, text=True, timeout=60
        )
        assert proc.returncode == 0
        assert proc.stdout == ""

    def test_trainable_count_matches_counting_rule(self):
        from peftbo_worker.trainer import DEFAULT_HIDDEN_DIM

        req = _request(2, layers=(1, 2, 5), d_sa=12, d_pa=96, l_pt=1)
        proc = _talk([json.dumps(req)])
        response = json.loads(proc.stdout.splitlines()[0])
        assert response["trainable_params"] == 3 * 2 * DEFAULT_HIDDEN_DIM * 109
