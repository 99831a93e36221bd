// Recorded responses from the job service for the fib example.
// Regenerate by driving JobManager with the fib corpus entry and
// scrubbing the job id to a fixed value.

import type { ApplyResult, CreatedJob, JobSnapshot } from "../src/api.js";

export const createdJob: CreatedJob = {
  "id": "fib-fixture-0001",
  "mode": "idle",
  "source_rev": 0
};

export const idleSnapshot: JobSnapshot = {
  "id": "fib-fixture-0001",
  "mode": "idle",
  "monotone": true,
  "excluded": [],
  "removable": [],
  "source_rev": 0,
  "source": "function Fib(n: nat): nat\n{\n  if n < 2 then n\n  else Fib(n - 2) + Fib(n - 1)\n}\n\nlemma FibLemma(n: nat)\n  ensures Fib(n) % 2 == 0 <==> n % 3 == 0\n  decreases n\n{\n  if n < 2 {\n  } else {\n    FibLemma(n - 2);\n    FibLemma(n - 1);\n  }\n}\n",
  "dirty": [],
  "methods": [
    {
      "name": "FibLemma",
      "excluded": false,
      "dirty": false
    }
  ],
  "file_name": "fib.dfy",
  "parse_error": null,
  "last_error": null
};

export const successSnapshot: JobSnapshot = {
  "id": "fib-fixture-0001",
  "mode": "success",
  "monotone": true,
  "excluded": [],
  "removable": [
    {
      "id": "FibLemma:decreases:0",
      "kind": "decreases",
      "start": 147,
      "end": 158,
      "method": "FibLemma"
    },
    {
      "id": "FibLemma:lemma_call:1",
      "kind": "lemma_call",
      "start": 189,
      "end": 205,
      "method": "FibLemma"
    },
    {
      "id": "FibLemma:lemma_call:2",
      "kind": "lemma_call",
      "start": 210,
      "end": 226,
      "method": "FibLemma"
    }
  ],
  "source_rev": 0,
  "source": "function Fib(n: nat): nat\n{\n  if n < 2 then n\n  else Fib(n - 2) + Fib(n - 1)\n}\n\nlemma FibLemma(n: nat)\n  ensures Fib(n) % 2 == 0 <==> n % 3 == 0\n  decreases n\n{\n  if n < 2 {\n  } else {\n    FibLemma(n - 2);\n    FibLemma(n - 1);\n  }\n}\n",
  "dirty": [],
  "methods": [
    {
      "name": "FibLemma",
      "excluded": false,
      "dirty": false
    }
  ],
  "file_name": "fib.dfy",
  "parse_error": null,
  "last_error": null
};

export const applyResult: ApplyResult = {
  "source": "function Fib(n: nat): nat\n{\n  if n < 2 then n\n  else Fib(n - 2) + Fib(n - 1)\n}\n\nlemma FibLemma(n: nat)\n  ensures Fib(n) % 2 == 0 <==> n % 3 == 0\n{\n  if n < 2 {\n  } else {\n  }\n}\n",
  "source_rev": 1
};

export const afterApplySnapshot: JobSnapshot = {
  "id": "fib-fixture-0001",
  "mode": "idle",
  "monotone": true,
  "excluded": [],
  "removable": [],
  "source_rev": 1,
  "source": "function Fib(n: nat): nat\n{\n  if n < 2 then n\n  else Fib(n - 2) + Fib(n - 1)\n}\n\nlemma FibLemma(n: nat)\n  ensures Fib(n) % 2 == 0 <==> n % 3 == 0\n{\n  if n < 2 {\n  } else {\n  }\n}\n",
  "dirty": [
    "FibLemma"
  ],
  "methods": [
    {
      "name": "FibLemma",
      "excluded": false,
      "dirty": true
    }
  ],
  "file_name": "fib.dfy",
  "parse_error": null,
  "last_error": null
};

export const partialApplyResult: ApplyResult = {
  "source": "function Fib(n: nat): nat\n{\n  if n < 2 then n\n  else Fib(n - 2) + Fib(n - 1)\n}\n\nlemma FibLemma(n: nat)\n  ensures Fib(n) % 2 == 0 <==> n % 3 == 0\n{\n  if n < 2 {\n  } else {\n    FibLemma(n - 2);\n    FibLemma(n - 1);\n  }\n}\n",
  "source_rev": 1
};

export const partialIdleSnapshot: JobSnapshot = {
  "id": "fib-fixture-0001",
  "mode": "idle",
  "monotone": true,
  "excluded": [],
  "removable": [],
  "source_rev": 1,
  "source": "function Fib(n: nat): nat\n{\n  if n < 2 then n\n  else Fib(n - 2) + Fib(n - 1)\n}\n\nlemma FibLemma(n: nat)\n  ensures Fib(n) % 2 == 0 <==> n % 3 == 0\n{\n  if n < 2 {\n  } else {\n    FibLemma(n - 2);\n    FibLemma(n - 1);\n  }\n}\n",
  "dirty": [
    "FibLemma"
  ],
  "methods": [
    {
      "name": "FibLemma",
      "excluded": false,
      "dirty": true
    }
  ],
  "file_name": "fib.dfy",
  "parse_error": null,
  "last_error": null
};

export const reanalyzedSnapshot: JobSnapshot = {
  "id": "fib-fixture-0001",
  "mode": "success",
  "monotone": true,
  "excluded": [],
  "removable": [
    {
      "id": "FibLemma:lemma_call:0",
      "kind": "lemma_call",
      "start": 175,
      "end": 191,
      "method": "FibLemma"
    },
    {
      "id": "FibLemma:lemma_call:1",
      "kind": "lemma_call",
      "start": 196,
      "end": 212,
      "method": "FibLemma"
    }
  ],
  "source_rev": 1,
  "source": "function Fib(n: nat): nat\n{\n  if n < 2 then n\n  else Fib(n - 2) + Fib(n - 1)\n}\n\nlemma FibLemma(n: nat)\n  ensures Fib(n) % 2 == 0 <==> n % 3 == 0\n{\n  if n < 2 {\n  } else {\n    FibLemma(n - 2);\n    FibLemma(n - 1);\n  }\n}\n",
  "dirty": [],
  "methods": [
    {
      "name": "FibLemma",
      "excluded": false,
      "dirty": false
    }
  ],
  "file_name": "fib.dfy",
  "parse_error": null,
  "last_error": null
};

export const goldenSource: string = "function Fib(n: nat): nat\n{\n  if n < 2 then n\n  else Fib(n - 2) + Fib(n - 1)\n}\n\nlemma FibLemma(n: nat)\n  ensures Fib(n) % 2 == 0 <==> n % 3 == 0\n{\n  if n < 2 {\n  } else {\n  }\n}\n";

export const originalSource: string = "function Fib(n: nat): nat\n{\n  if n < 2 then n\n  else Fib(n - 2) + Fib(n - 1)\n}\n\nlemma FibLemma(n: nat)\n  ensures Fib(n) % 2 == 0 <==> n % 3 == 0\n  decreases n\n{\n  if n < 2 {\n  } else {\n    FibLemma(n - 2);\n    FibLemma(n - 1);\n  }\n}\n";
