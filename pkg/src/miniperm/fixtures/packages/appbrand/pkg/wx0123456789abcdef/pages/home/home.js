Page({ onLoad: function () { console.log('home'); } });
